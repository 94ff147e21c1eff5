#include <gtest/gtest.h>

#include <random>
#include <set>

#include "lsmtune/options.h"
#include "support/random_config.h"

namespace lsmtune {
namespace {

TEST(SchemaTest, HoldsCompactionKeysPlusAuxiliaries) {
  const auto& schema = Schema();
  EXPECT_EQ(schema.size(), 17u);
  std::set<std::string_view> keys;
  int engine_default = 0;
  for (const auto& e : schema) {
    EXPECT_TRUE(keys.insert(e.key).second) << e.key;
    if (e.provenance == Provenance::kEngineDefault) ++engine_default;
    if (e.default_value) {
      EXPECT_TRUE(e.InRange(*e.default_value)) << e.key;
    } else {
      EXPECT_TRUE(e.optional) << e.key;
    }
  }
  EXPECT_EQ(engine_default, 13);
  for (auto aux : {"write_buffer_size", "max_write_buffer_number",
                   "block_cache_size", "cache_index_and_filter_blocks"}) {
    ASSERT_NE(FindOption(aux), nullptr) << aux;
    EXPECT_EQ(FindOption(aux)->provenance, Provenance::kEngineNamed);
  }
}

TEST(SchemaTest, DefaultsMatchDefaultConfigKeyByKey) {
  const TuningConfig defaults = DefaultConfig();
  for (const auto& e : Schema()) {
    EXPECT_EQ(e.get(defaults), e.default_value) << e.key;
  }
}

TEST(SchemaTest, GoldenDefaults) {
  auto def = [](std::string_view key) { return *FindOption(key)->default_value; };
  EXPECT_EQ(def("level0_file_num_compaction_trigger"), OptionValue{std::int64_t{4}});
  EXPECT_EQ(def("level0_slowdown_writes_trigger"), OptionValue{std::int64_t{20}});
  EXPECT_EQ(def("level0_stop_writes_trigger"), OptionValue{std::int64_t{36}});
  EXPECT_EQ(def("max_bytes_for_level_base"), OptionValue{std::int64_t{268435456}});
  EXPECT_EQ(def("max_bytes_for_level_multiplier"), OptionValue{std::int64_t{10}});
  EXPECT_EQ(def("max_background_compactions"), OptionValue{std::int64_t{1}});
  EXPECT_EQ(def("max_background_jobs"), OptionValue{std::int64_t{2}});
  EXPECT_EQ(def("target_file_size_base"), OptionValue{std::int64_t{67108864}});
  EXPECT_EQ(def("target_file_size_multiplier"), OptionValue{std::int64_t{1}});
  EXPECT_EQ(def("compaction_readahead_size"), OptionValue{std::int64_t{0}});
  EXPECT_EQ(def("compaction_style"), OptionValue{std::string("level")});
  EXPECT_FALSE(FindOption("max_compaction_bytes")->default_value.has_value());
  EXPECT_FALSE(FindOption("compaction_pri")->default_value.has_value());
}

TEST(SchemaTest, Lookup) {
  const auto* style = FindOption("compaction_style");
  ASSERT_NE(style, nullptr);
  EXPECT_EQ(style->variants,
            (std::vector<std::string_view>{"level", "universal", "fifo"}));
  EXPECT_EQ(style->kind, ValueKind::kEnum);
  EXPECT_EQ(FindOption("nonexistent_key"), nullptr);
  EXPECT_EQ(FindOption("max_background_jobs")->section, OptionSection::kDBOptions);
}

TEST(SchemaTest, ClampGoesToNearestBound) {
  const auto* mult = FindOption("max_bytes_for_level_multiplier");
  EXPECT_EQ(mult->Clamp(OptionValue{std::int64_t{0}}), OptionValue{std::int64_t{1}});
  EXPECT_EQ(mult->Clamp(OptionValue{std::int64_t{5000}}),
            OptionValue{std::int64_t{100}});
  EXPECT_EQ(mult->Clamp(OptionValue{std::int64_t{7}}), OptionValue{std::int64_t{7}});
}

constexpr std::string_view kDefaultText =
    "[DBOptions]\n"
    "  compaction_readahead_size=0\n"
    "  max_background_compactions=1\n"
    "  max_background_jobs=2\n"
    "\n"
    "[CFOptions \"default\"]\n"
    "  block_cache_size=8388608\n"
    "  cache_index_and_filter_blocks=false\n"
    "  compaction_style=level\n"
    "  level0_file_num_compaction_trigger=4\n"
    "  level0_slowdown_writes_trigger=20\n"
    "  level0_stop_writes_trigger=36\n"
    "  max_bytes_for_level_base=268435456\n"
    "  max_bytes_for_level_multiplier=10\n"
    "  max_write_buffer_number=2\n"
    "  target_file_size_base=67108864\n"
    "  target_file_size_multiplier=1\n"
    "  write_buffer_size=67108864\n";

TEST(SerializeTest, DefaultsCanonicalText) {
  EXPECT_EQ(SerializeOptions(DefaultConfig()), kDefaultText);
  EXPECT_NE(SerializeOptions(DefaultConfig()).find("level0_stop_writes_trigger=36"),
            std::string::npos);
}

TEST(SerializeTest, UnsetOptionalIsOmittedAndParsesBackUnset) {
  TuningConfig c;
  const std::string text = SerializeOptions(c);
  EXPECT_EQ(text.find("max_compaction_bytes"), std::string::npos);
  EXPECT_EQ(text.find("compaction_pri"), std::string::npos);
  const TuningConfig back = ConfigFromOptionsText(text);
  EXPECT_FALSE(back.max_compaction_bytes.has_value());

  c.max_compaction_bytes = 500 * kMiB;
  c.compaction_pri = CompactionPri::kOldestLargestSeqFirst;
  const TuningConfig set_back = ConfigFromOptionsText(SerializeOptions(c));
  EXPECT_EQ(set_back.max_compaction_bytes, 500 * kMiB);
  EXPECT_EQ(set_back.compaction_pri, CompactionPri::kOldestLargestSeqFirst);
}

TEST(SerializeTest, RoundTripProperty) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 300; ++i) {
    const TuningConfig c = testing::RandomValidConfig(rng);
    const std::string text = SerializeOptions(c);
    const TuningConfig back = ConfigFromOptionsText(text);
    ASSERT_EQ(back, c) << text;
    ASSERT_EQ(SerializeOptions(back), text);
  }
}

TEST(ParseTest, AcceptsCommentsSuffixesAndLooseSections) {
  const auto parsed = ParseOptions(
      "# tuned\n"
      "max_background_jobs = 4   # was 2\n"
      "[Version]\n"
      "[DBOptions]\n"
      "compaction_readahead_size=2M\n"
      "[CFOptions \"default\"]\n"
      "  write_buffer_size=128MiB\r\n"
      "  max_bytes_for_level_base=1G\n"
      "  max_bytes_for_level_multiplier=8.000000\n"
      "  cache_index_and_filter_blocks=TRUE\n"
      "  compaction_style=kCompactionStyleLevel\n"
      "  block_cache_size=16k\n");
  EXPECT_TRUE(parsed.unknown_keys.empty());
  EXPECT_TRUE(parsed.warnings.empty());
  const TuningConfig c = ApplyOptions(parsed, DefaultConfig());
  EXPECT_EQ(c.max_background_jobs, 4);
  EXPECT_EQ(c.compaction_readahead_size, 2 * kMiB);
  EXPECT_EQ(c.write_buffer_size, 128 * kMiB);
  EXPECT_EQ(c.max_bytes_for_level_base, kGiB);
  EXPECT_EQ(c.max_bytes_for_level_multiplier, 8);
  EXPECT_TRUE(c.cache_index_and_filter_blocks);
  EXPECT_EQ(c.compaction_style, CompactionStyle::kLevel);
  EXPECT_EQ(c.block_cache_size, 16 * kKiB);
  EXPECT_EQ(parsed.Find("write_buffer_size")->line, 7);
}

TEST(ParseTest, UnknownKeysAreQuarantined) {
  const auto parsed = ParseOptions("[CFOptions \"default\"]\nfoo_bar=7\n");
  ASSERT_EQ(parsed.unknown_keys.size(), 1u);
  EXPECT_EQ(parsed.unknown_keys[0].key, "foo_bar");
  EXPECT_EQ(parsed.unknown_keys[0].raw_value, "7");
  EXPECT_EQ(parsed.unknown_keys[0].line, 2);
  EXPECT_TRUE(parsed.assignments.empty());
}

OptionsError ExpectError(std::string_view text) {
  try {
    ParseOptions(text);
  } catch (const OptionsError& e) {
    return e;
  }
  ADD_FAILURE() << "no error for: " << text;
  return OptionsError(OptionsErrorKind::kSyntax, 0, "");
}

TEST(ParseTest, PositionedErrors) {
  auto e = ExpectError("[DBOptions]\nmax_background_compactions=-1\n");
  EXPECT_EQ(e.kind(), OptionsErrorKind::kRange);
  EXPECT_EQ(e.line(), 2);

  e = ExpectError("[DBOptions]\n\nmax_background_jobs\n");
  EXPECT_EQ(e.kind(), OptionsErrorKind::kSyntax);
  EXPECT_EQ(e.line(), 3);

  e = ExpectError("[DBOptions\n");
  EXPECT_EQ(e.kind(), OptionsErrorKind::kSyntax);
  EXPECT_EQ(e.line(), 1);

  e = ExpectError("max_background_jobs=many\n");
  EXPECT_EQ(e.kind(), OptionsErrorKind::kType);
  e = ExpectError("write_buffer_size=64Q\n");
  EXPECT_EQ(e.kind(), OptionsErrorKind::kType);
  e = ExpectError("cache_index_and_filter_blocks=maybe\n");
  EXPECT_EQ(e.kind(), OptionsErrorKind::kType);
  e = ExpectError("compaction_style=tiered\n");
  EXPECT_EQ(e.kind(), OptionsErrorKind::kRange);
  e = ExpectError("max_bytes_for_level_multiplier=0\n");
  EXPECT_EQ(e.kind(), OptionsErrorKind::kRange);
  e = ExpectError("max_bytes_for_level_base=99999999999999999999999\n");
  EXPECT_EQ(e.kind(), OptionsErrorKind::kRange);
  EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
}

TEST(ParseTest, DuplicateKeyLastWinsWithWarning) {
  const auto parsed = ParseOptions(
      "max_background_jobs=3\nmax_background_compactions=2\nmax_background_jobs=5\n");
  ASSERT_EQ(parsed.assignments.size(), 2u);
  EXPECT_EQ(parsed.assignments[0].key, "max_background_jobs");
  EXPECT_EQ(parsed.assignments[0].value, OptionValue{std::int64_t{5}});
  EXPECT_EQ(parsed.assignments[0].line, 3);
  ASSERT_EQ(parsed.warnings.size(), 1u);
  EXPECT_NE(parsed.warnings[0].find("duplicate"), std::string::npos);
}

TEST(ParseTest, WrongSectionWarns) {
  const auto parsed = ParseOptions("[CFOptions \"default\"]\nmax_background_jobs=3\n");
  ASSERT_EQ(parsed.warnings.size(), 1u);
  EXPECT_EQ(parsed.assignments.size(), 1u);
}

TEST(ParseTest, LenientModeCollectsIssues) {
  const auto parsed = ParseOptions(
      "Here is my config:\n"
      "max_background_compactions=-1\n"
      "max_background_jobs=lots\n"
      "level0_file_num_compaction_trigger=6\n",
      ParseMode::kLenient);
  ASSERT_EQ(parsed.issues.size(), 3u);
  EXPECT_EQ(parsed.issues[0].kind, OptionsErrorKind::kSyntax);
  EXPECT_EQ(parsed.issues[1].kind, OptionsErrorKind::kRange);
  EXPECT_EQ(parsed.issues[2].kind, OptionsErrorKind::kType);
  // Range issues keep the value for repair; type issues do not.
  ASSERT_NE(parsed.Find("max_background_compactions"), nullptr);
  EXPECT_EQ(parsed.Find("max_background_jobs"), nullptr);
  EXPECT_THROW(ApplyOptions(parsed, DefaultConfig()), OptionsError);
}

// Random byte soup plus mutations of a valid file.
std::string FuzzInput(std::mt19937_64& rng) {
  static constexpr std::string_view kAlphabet =
      "abcdefghijklmnopqrstuvwxyz_=[]\"#-+.0123456789KMGT \t\n\r";
  std::string s;
  if (rng() % 2) {
    s = std::string(kDefaultText);
    const int edits = 1 + static_cast<int>(rng() % 8);
    for (int i = 0; i < edits && !s.empty(); ++i) {
      const std::size_t at = rng() % s.size();
      switch (rng() % 3) {
        case 0:
          s.erase(at, 1 + rng() % 10);
          break;
        case 1:
          s.insert(at, 1, kAlphabet[rng() % kAlphabet.size()]);
          break;
        default:
          s[at] = static_cast<char>(rng() % 256);
      }
    }
  } else {
    const std::size_t n = rng() % 300;
    for (std::size_t i = 0; i < n; ++i) {
      s += rng() % 10 == 0 ? static_cast<char>(rng() % 256)
                           : kAlphabet[rng() % kAlphabet.size()];
    }
  }
  return s;
}

TEST(ParseTest, FuzzedInputNeverEscapesAsAnythingButOptionsError) {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 3000; ++i) {
    const std::string input = FuzzInput(rng);
    try {
      ParseOptions(input, ParseMode::kStrict);
    } catch (const OptionsError& e) {
      EXPECT_GE(e.line(), 1);
    }
    EXPECT_NO_THROW(ParseOptions(input, ParseMode::kLenient));
  }
}

TEST(DiffTest, Examples) {
  const TuningConfig d = DefaultConfig();
  EXPECT_TRUE(DiffConfigs(d, d).empty());
  TuningConfig m = d;
  m.max_bytes_for_level_multiplier = 8;
  EXPECT_EQ(DiffConfigs(d, m),
            (std::vector<ConfigChange>{{"max_bytes_for_level_multiplier", "10", "8"}}));
  m.max_compaction_bytes = kGiB;
  const auto diff = DiffConfigs(d, m);
  ASSERT_EQ(diff.size(), 2u);
  EXPECT_EQ(diff[1].old_value, "unset");
}

TEST(DiffTest, SymmetricAndEmptyIffEqual) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 200; ++i) {
    const TuningConfig a = testing::RandomValidConfig(rng);
    const TuningConfig b = rng() % 4 == 0 ? a : testing::RandomValidConfig(rng);
    const auto ab = DiffConfigs(a, b);
    const auto ba = DiffConfigs(b, a);
    ASSERT_EQ(ab.size(), ba.size());
    for (std::size_t k = 0; k < ab.size(); ++k) {
      EXPECT_EQ(ab[k].key, ba[k].key);
      EXPECT_EQ(ab[k].old_value, ba[k].new_value);
    }
    EXPECT_EQ(ab.empty(), a == b);
  }
}

}  // namespace
}  // namespace lsmtune
