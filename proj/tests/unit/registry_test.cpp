#include <cstdlib>

#include <gtest/gtest.h>

#include "ganshift/error.hpp"
#include "ganshift/toy_backends.hpp"

namespace ganshift {
namespace {

TEST(BackendRegistry, ToyAlwaysPresent) {
  auto& registry = BackendRegistry::instance();
  EXPECT_TRUE(registry.contains("toy"));
  const BackendSet set = registry.create("toy", 3);
  EXPECT_EQ(set.generator->name(), "toy");
  EXPECT_EQ(set.generator->seed(), 3u);
  EXPECT_EQ(set.embedder->input_height(), 16u);
}

TEST(BackendRegistry, UnknownNameThrows) {
  EXPECT_THROW(BackendRegistry::instance().create("no_such_backend", 1), ConfigError);
}

TEST(BackendRegistry, RegisterReplacesFactory) {
  auto& registry = BackendRegistry::instance();
  registry.register_backend("toy_alias", [](std::uint64_t s) { return make_toy_backends(s); });
  registry.register_backend("toy_alias", [](std::uint64_t s) { return make_toy_backends(s + 1); });
  EXPECT_EQ(registry.create("toy_alias", 1).generator->seed(), 2u);
  std::size_t count = 0;
  for (const auto& n : registry.names()) count += n == "toy_alias";
  EXPECT_EQ(count, 1u);
}

TEST(BackendRegistry, LoadsPluginFromSearchPath) {
  ASSERT_EQ(setenv("GANSHIFT_PLUGIN_PATH", "/nonexistent:" GANSHIFT_TEST_PLUGIN_DIR, 1), 0);
  auto& registry = BackendRegistry::instance();
  const BackendSet set = registry.create("mirror", 5);
  EXPECT_TRUE(registry.contains("mirror"));
  EXPECT_EQ(set.generator->seed(), 1005u);
  const GeneratorParams params = set.generator->initial_params();
  EXPECT_EQ(params, ToyGeneratorBackend(1005).initial_params());
}

}  // namespace
}  // namespace ganshift
