#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "recon/prompt_catalog.h"

namespace recon {
namespace {

TEST(PromptCatalogTest, PlaceholderScan) {
  EXPECT_EQ(Placeholders("a {x} b {y_z} {x} {Nope} {} {1}"),
            (std::vector<std::string>{"x", "y_z"}));
}

TEST(PromptCatalogTest, RenderSubstitutesAndRejectsMissing) {
  EXPECT_EQ(RenderTemplate("[{a}] {b}!", {{"a", "1"}, {"b", "{a}"}}), "[1] {a}!");
  EXPECT_EQ(RenderTemplate("json {\"k\": 1}", {}), "json {\"k\": 1}");
  EXPECT_THROW(RenderTemplate("{missing}", {}), TemplateError);
}

TEST(PromptCatalogTest, BuiltinHasEveryTemplateTheAgentUses) {
  const PromptCatalog catalog = PromptCatalog::Builtin();
  for (const char* id :
       {"system", "rules", "first_order", "think", "speak", "second_order",
        "refine", "refine_reminder", "cot", "format_reminder", "format_propose",
        "format_team_vote", "format_quest_vote", "format_assassinate",
        "style_speech", "style_thought", "judge", "role_merlin",
        "role_percival", "role_morgana", "role_assassin", "role_servant"}) {
    EXPECT_TRUE(catalog.Has(id)) << id;
  }
  for (const char* phase :
       {"propose", "discuss", "team_vote", "quest_vote", "assassinate"}) {
    EXPECT_TRUE(catalog.Has(std::string("task_") + phase)) << phase;
  }
  for (const char* metric : {"ccl", "lg", "ctr", "prs", "inf", "crt"}) {
    EXPECT_TRUE(catalog.Has(std::string("metric_") + metric)) << metric;
  }
}

// Every placeholder in every shipped template renders once given a value,
// and no braces of placeholder shape survive.
TEST(PromptCatalogTest, AllBuiltinTemplatesRender) {
  const PromptCatalog catalog = PromptCatalog::Builtin();
  for (const std::string& id : catalog.Ids()) {
    TemplateValues values;
    for (const std::string& name : Placeholders(catalog.Get(id))) {
      values[name] = "<" + name + ">";
    }
    const std::string rendered = catalog.Render(id, values);
    EXPECT_TRUE(Placeholders(rendered).empty()) << id;
    EXPECT_FALSE(rendered.empty()) << id;
  }
}

TEST(PromptCatalogTest, PipelineTemplatesUseTheDocumentedPlaceholders) {
  const PromptCatalog catalog = PromptCatalog::Builtin();
  auto has = [&](const char* id, const char* name) {
    const auto names = Placeholders(catalog.Get(id));
    return std::find(names.begin(), names.end(), name) != names.end();
  };
  EXPECT_TRUE(has("first_order", "assumption"));
  EXPECT_TRUE(has("think", "task"));
  EXPECT_TRUE(has("speak", "thought"));
  EXPECT_TRUE(has("second_order", "speech"));
  EXPECT_TRUE(has("refine", "perception"));
  for (const char* id : {"first_order", "think", "speak", "second_order", "refine"}) {
    EXPECT_TRUE(has(id, "history")) << id;
    EXPECT_TRUE(has(id, "knowledge")) << id;
  }
}

TEST(PromptCatalogTest, DirectoryOverridesBuiltin) {
  const auto dir = std::filesystem::temp_directory_path() / "recon_catalog_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "think.txt") << "custom {task}\n";
  std::ofstream(dir / "notes.md") << "ignored";
  const PromptCatalog catalog = PromptCatalog::LoadDirectory(dir);
  EXPECT_EQ(catalog.Get("think"), "custom {task}");
  EXPECT_TRUE(catalog.Has("speak"));
  EXPECT_FALSE(catalog.Has("notes"));
  std::filesystem::remove_all(dir);
  EXPECT_THROW(PromptCatalog::LoadDirectory(dir), TemplateError);
}

TEST(PromptCatalogTest, UnknownTemplate) {
  EXPECT_THROW(PromptCatalog::Builtin().Get("nope"), TemplateError);
}

}  // namespace
}  // namespace recon
