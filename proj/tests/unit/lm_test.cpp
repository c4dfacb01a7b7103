#include <gtest/gtest.h>

#include <fstream>
#include <nlohmann/json.hpp>

#include "test_support.hpp"
#include "tta/errors.hpp"
#include "tta/lm/decode.hpp"

namespace {

using namespace tta;
using tta::testing::scratch_dir;
using tta::testing::small_config;
using tta::testing::small_vocab;

TEST(Tokenizer, GreedyLongestMatch) {
  const lm::Tokenizer tok(small_vocab());
  const auto& v = tok.vocabulary();
  EXPECT_EQ(tok.encode("abcab"), (std::vector<lm::TokenId>{*v.find("abc"), *v.find("ab")}));
  EXPECT_EQ(tok.encode("a"), std::vector<lm::TokenId>{*v.find("a")});
  EXPECT_EQ(tok.encode("click [3]\n"),
            (std::vector<lm::TokenId>{*v.find("click"), *v.find(" ["), *v.find("3"), *v.find("]\n")}));
}

TEST(Tokenizer, OutOfCoverageBytesBecomeUnk) {
  const lm::Tokenizer tok(small_vocab());
  const auto ids = tok.encode("a\x01" "b\xc3\xa9");
  ASSERT_EQ(ids.size(), 5u);
  EXPECT_EQ(ids[1], lm::Vocabulary::kUnk);
  EXPECT_EQ(ids[3], lm::Vocabulary::kUnk);
  EXPECT_EQ(ids[4], lm::Vocabulary::kUnk);
}

TEST(Tokenizer, SpecialTokenTextIsNotASpecialToken) {
  const lm::Tokenizer tok(small_vocab());
  for (auto id : tok.encode("<bos><eos><unk>")) EXPECT_GE(id, 3);
}

TEST(Tokenizer, RoundTripOnRandomPrintableText) {
  const lm::Tokenizer tok(small_vocab());
  std::mt19937_64 rng(7);
  const std::string alphabet = "abc click[]\n\t`xyz0123 ";
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1), len(0, 60);
  for (int i = 0; i < 200; ++i) {
    std::string s;
    for (std::size_t k = len(rng); k > 0; --k) s += alphabet[pick(rng)];
    EXPECT_EQ(tok.decode(tok.encode(s)), s);
  }
}

TEST(Vocabulary, RejectsBadLayouts) {
  EXPECT_THROW(lm::Vocabulary({"a", "b"}), FormatError);
  std::vector<std::string> t{"<unk>", "<bos>", "<eos>", "x"};
  EXPECT_THROW(lm::Vocabulary{t}, FormatError);  // byte fallback missing
  auto ok = small_vocab().tokens();
  ok.push_back("ab");
  EXPECT_THROW(lm::Vocabulary{ok}, FormatError);  // duplicate
}

TEST(Vocabulary, EscapesRoundTrip) {
  for (const std::string s : {"\n", "\t", "\\", "a\\nb", "]\n", "\r"}) EXPECT_EQ(lm::unescape_token(lm::escape_token(s)), s);
}

TEST(Vocabulary, SaveLoadRoundTrip) {
  const auto dir = scratch_dir("vocab");
  const auto v = small_vocab();
  v.save(dir / "v.vocab");
  EXPECT_EQ(lm::Vocabulary::load(dir / "v.vocab").tokens(), v.tokens());
}

TEST(Vocabulary, BundledVocabularyMatchesModel) {
  const auto v = lm::Vocabulary::load(data_dir() / "model" / "tiny.vocab");
  EXPECT_EQ(v.size(), 512u);
  EXPECT_TRUE(v.find("Go").has_value());
  EXPECT_TRUE(v.find("Search").has_value());
}

TEST(Model, RandomModelIsSeeded) {
  const auto a = lm::random_model(small_config(), 1);
  EXPECT_EQ(a, lm::random_model(small_config(), 1));
  EXPECT_NE(a, lm::random_model(small_config(), 2));
  EXPECT_NO_THROW(lm::validate(a));
}

TEST(Model, SaveLoadRoundTripIsExact) {
  const auto dir = scratch_dir("model_rt");
  const auto w = lm::random_model(small_config(), 3);
  lm::save_model(w, dir / "m.ttaw");
  EXPECT_EQ(*lm::load_model(dir / "m.ttaw"), w);
}

class CorruptWeights : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = scratch_dir("model_corrupt");
    lm::save_model(lm::random_model(small_config(), 4), dir_ / "m.ttaw");
    bytes_ = read_file(dir_ / "m.ttaw");
  }
  void expect_format_error(const std::string& bytes) {
    write_file(dir_ / "bad.ttaw", bytes);
    EXPECT_THROW(lm::load_model(dir_ / "bad.ttaw"), FormatError);
  }
  std::filesystem::path dir_;
  std::string bytes_;
};

TEST_F(CorruptWeights, BadMagic) {
  auto b = bytes_;
  b[0] = 'X';
  expect_format_error(b);
}

TEST_F(CorruptWeights, Truncated) { expect_format_error(bytes_.substr(0, bytes_.size() - 8)); }
TEST_F(CorruptWeights, TruncatedHeader) { expect_format_error(bytes_.substr(0, 10)); }
TEST_F(CorruptWeights, TrailingBytes) { expect_format_error(bytes_ + "xxxxxxxx"); }

TEST_F(CorruptWeights, NonFiniteEntry) {
  auto b = bytes_;
  const double nan = std::nan("");
  std::memcpy(b.data() + b.size() - sizeof nan, &nan, sizeof nan);
  expect_format_error(b);
}

TEST(Model, ValidateCatchesShapeMismatch) {
  auto w = lm::random_model(small_config(), 5);
  w.output_projection = lm::Matrix(7, w.config.d);
  EXPECT_THROW(lm::validate(w), DimensionError);
  auto c = small_config();
  c.heads = 3;
  EXPECT_THROW(lm::random_model(c, 1), DimensionError);
}

TEST(Forward, MatchesIndependentReference) {
  const auto golden = nlohmann::json::parse(read_file(data_dir() / "golden" / "forward_logits.json"));
  const auto weights = lm::load_model(data_dir() / "model" / "tiny.ttaw");
  const lm::Tokenizer tok(lm::Vocabulary::load(data_dir() / "model" / "tiny.vocab"));

  std::vector<lm::TokenId> ids{lm::Vocabulary::kBos};
  for (auto id : tok.encode(golden.at("text").get<std::string>())) ids.push_back(id);
  ASSERT_EQ(ids, golden.at("ids").get<std::vector<lm::TokenId>>());

  const auto out = lm::forward(*weights, ids);
  const auto& ref = golden.at("logits");
  ASSERT_EQ(out.logits.rows(), ref.size());
  double worst = 0.0;
  for (std::size_t t = 0; t < ref.size(); ++t) {
    for (std::size_t v = 0; v < ref[t].size(); ++v) {
      const double r = ref[t][v].get<double>();
      worst = std::max(worst, std::abs(out.logits(t, v) - r) / (1.0 + std::abs(r)));
    }
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(Forward, LogitsAreHiddenTimesProjection) {
  const auto w = lm::random_model(small_config(), 6);
  const std::vector<lm::TokenId> ids{1, 40, 41, 42, 7};
  const auto out = lm::forward(w, ids);
  for (std::size_t t = 0; t < ids.size(); ++t) {
    const auto z = lm::project(w, out.hidden.values.row(t));
    for (std::size_t v = 0; v < z.size(); ++v) EXPECT_EQ(z[v], out.logits(t, v));
  }
}

TEST(Forward, IsCausalAndMatchesIncrementalDecoding) {
  const auto w = lm::random_model(small_config(), 8);
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<lm::TokenId> tok(0, 119);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<lm::TokenId> ids(12);
    for (auto& id : ids) id = tok(rng);
    const auto full = lm::forward(w, ids);
    const auto prefix = lm::forward(w, std::span(ids).first(5));
    lm::DecoderSession session(w);
    for (std::size_t t = 0; t < ids.size(); ++t) {
      const auto h = session.append(ids[t]);
      for (std::size_t k = 0; k < h.size(); ++k) {
        EXPECT_EQ(h[k], full.hidden.values(t, k));
        if (t < 5) EXPECT_EQ(prefix.hidden.values(t, k), full.hidden.values(t, k));
      }
    }
  }
}

TEST(Forward, RejectsBadInputs) {
  const auto w = lm::random_model(small_config(120, 4), 9);
  EXPECT_THROW(lm::forward(w, std::vector<lm::TokenId>{}), InsufficientContextError);
  EXPECT_THROW(lm::forward(w, std::vector<lm::TokenId>{1, 2, 3, 4, 5}), CapacityError);
  EXPECT_THROW(lm::forward(w, std::vector<lm::TokenId>{1, 500}), DimensionError);
  lm::DecoderSession s(w);
  for (int i = 0; i < 4; ++i) s.append(1);
  EXPECT_THROW(s.append(1), CapacityError);
}

TEST(Decode, ArgmaxPrefersLowestIndexOnTies) {
  const std::vector<double> z{0.5, 2.0, 2.0, -1.0};
  EXPECT_EQ(lm::argmax(z), 1);
  EXPECT_THROW(lm::argmax(std::vector<double>{}), DimensionError);
}

TEST(Decode, SoftmaxIsADistribution) {
  const std::vector<double> z{1000.0, 999.0, -5.0};
  for (double temp : {0.5, 1.0, 3.0}) {
    const auto p = lm::softmax(z, temp);
    double sum = 0.0;
    for (double v : p) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-12);
    EXPECT_GT(p[0], p[1]);
  }
}

TEST(Decode, SamplingIsReproducibleAndGreedyAtZero) {
  const std::vector<double> z{0.1, 0.2, 0.3, 0.25};
  lm::TokenSampler a({1.0, 42}), b({1.0, 42});
  std::vector<lm::TokenId> da, db;
  for (int i = 0; i < 50; ++i) {
    da.push_back(a.next(z));
    db.push_back(b.next(z));
  }
  EXPECT_EQ(da, db);
  EXPECT_EQ(lm::decode_step(z, {0.0, 3}), 2);
}

}  // namespace
