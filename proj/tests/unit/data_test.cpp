#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "denoise/data.hpp"
#include "denoise/noise.hpp"
#include "denoise/rng.hpp"
#include "denoise/synth.hpp"
#include "fixtures.hpp"

namespace denoise {
namespace {

using testing::make_dataset;
using testing::random_dataset;
using testing::TempDir;
using Tokens = std::vector<std::string>;

TEST(Tokenize, QuestionExample) {
  EXPECT_EQ(tokenize("How did serfdom develop?"), (Tokens{"how", "did", "serfdom", "develop"}));
}

TEST(Tokenize, EmptyBecomesUnk) {
  EXPECT_EQ(tokenize(""), (Tokens{"<unk>"}));
  EXPECT_EQ(tokenize("   \t\n"), (Tokens{"<unk>"}));
}

TEST(Tokenize, StandalonePunctuationKept) {
  EXPECT_EQ(tokenize("AP - Reuters said."), (Tokens{"ap", "-", "reuters", "said"}));
  EXPECT_EQ(raw_tokens("AP - Reuters said."), (Tokens{"AP", "-", "Reuters", "said"}));
}

TEST(Tokenize, InnerPunctuationKept) {
  EXPECT_EQ(tokenize("(U.S.) isn't \"here\""), (Tokens{"u.s", "isn't", "here"}));
}

TEST(Tokenize, UnicodeWhitespaceSplits) {
  // U+00A0 no-break space and U+3000 ideographic space.
  EXPECT_EQ(tokenize("a\xC2\xA0" "b\xE3\x80\x80" "c"), (Tokens{"a", "b", "c"}));
}

TEST(TokenizeProperty, IdempotentOnJoinedOutput) {
  const auto ds = random_dataset(200, 3, 17);
  const std::vector<std::string> extra = {"Hello, world!", "...", "x -- y", "(a) [b] {c}", "\"q\" 'r'", ""};
  auto texts = ds.texts();
  texts.insert(texts.end(), extra.begin(), extra.end());
  for (const auto& t : texts) {
    const auto once = tokenize(t);
    if (raw_tokens(t).empty()) continue;  // placeholder token, not text
    std::string joined;
    for (const auto& tok : once) joined += (joined.empty() ? "" : " ") + tok;
    EXPECT_EQ(tokenize(joined), once) << t;
  }
}

TEST(Vocab, Basic) {
  const auto v = Vocab::build({"a a b"}, 1);
  EXPECT_EQ(v.tokens(), (Tokens{"<unk>", "a", "b"}));
  EXPECT_EQ(v.id("a"), 1);
  EXPECT_EQ(v.id("b"), 2);
  EXPECT_EQ(v.id("zzz"), kUnkId);
}

TEST(Vocab, MinFreqDropsRareTokens) {
  const auto v = Vocab::build({"a a b"}, 2);
  EXPECT_EQ(v.tokens(), (Tokens{"<unk>", "a"}));
  EXPECT_EQ(v.id("b"), kUnkId);
}

TEST(Vocab, TiesAreLexicographic) {
  const auto v = Vocab::build({"y x y x z z z"}, 1);
  EXPECT_EQ(v.tokens(), (Tokens{"<unk>", "z", "x", "y"}));
}

TEST(Vocab, Errors) {
  EXPECT_THROW(Vocab::build({}, 1), std::invalid_argument);
  EXPECT_THROW(Vocab::build({"a"}, 0), std::invalid_argument);
}

TEST(Dataset, EncodeMapsOovToUnk) {
  auto train = make_dataset({{"the cat", 0}, {"the dog", 1}}, 2);
  auto test = make_dataset({{"the bird", 0}}, 2);
  auto vocab = std::make_shared<const Vocab>(Vocab::build(train.texts()));
  train.encode(vocab);
  test.encode(vocab);
  EXPECT_EQ(test.examples[0].tokens[0], vocab->id("the"));
  EXPECT_EQ(test.examples[0].tokens[1], kUnkId);
  for (const auto& ex : train.examples) {
    for (auto id : ex.tokens) EXPECT_LT(static_cast<std::size_t>(id), vocab->size());
  }
}

TEST(LoadTrec, ParsesCoarseLabel) {
  const auto ds = parse_dataset("DESC:manner How did serfdom develop ?\nNUM:date When was it ?\n", DataFormat::kTrec);
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.num_classes, 6u);
  EXPECT_EQ(ds.label_names[static_cast<std::size_t>(ds.examples[0].noisy_label)], "DESC");
  EXPECT_EQ(ds.examples[0].text, "How did serfdom develop ?");
  EXPECT_EQ(ds.examples[0].clean_label, ds.examples[0].noisy_label);
  EXPECT_EQ(ds.examples[1].id, 1u);
  EXPECT_EQ(ds.label_names[static_cast<std::size_t>(ds.examples[1].noisy_label)], "NUM");
}

TEST(LoadTrec, UnknownLabelNamesLine) {
  try {
    parse_dataset("DESC:def What ?\nFOO:bar baz\n", DataFormat::kTrec);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("FOO"), std::string::npos);
  }
}

TEST(LoadTrec, MalformedLineNamesLine) {
  try {
    parse_dataset("DESC:def What ?\n\nnocolonhere at all\n", DataFormat::kTrec);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(LoadTrec, FileSizeMatchesLineCount) {
  TempDir dir;
  SynthOptions opts;
  opts.count = 4949;
  testing::spit(dir / "train.txt", make_question_corpus(opts));
  EXPECT_EQ(load_dataset(dir / "train.txt", DataFormat::kTrec).size(), 4949u);
}

TEST(LoadTrec, RealTrainFileSize) {
  const auto [train, test] = testing::real_trec_paths();
  if (train.empty()) GTEST_SKIP() << "DENOISE_TREC_TRAIN/DENOISE_TREC_TEST not set";
  const auto ds = load_dataset(train, DataFormat::kTrec);
  EXPECT_EQ(ds.size(), 5452u);
  const auto parts = split_validation(ds, 503.0 / 5452.0, 7);
  EXPECT_EQ(parts.train.size(), 4949u);
  EXPECT_EQ(parts.validation.size(), 503u);
}

TEST(LoadAgNews, QuotedRow) {
  const auto ds = parse_dataset("3,\"Wall St.\",\"Stocks rose.\"\n1,\"A \"\"quoted\"\" title\",body\n",
                                DataFormat::kAgNews);
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.examples[0].noisy_label, 2);
  EXPECT_EQ(ds.examples[0].text, "Wall St. Stocks rose.");
  EXPECT_EQ(ds.examples[1].noisy_label, 0);
  EXPECT_EQ(ds.examples[1].text, "A \"quoted\" title body");
  EXPECT_EQ(ds.num_classes, 4u);
}

TEST(LoadAgNews, BadClassAndColumns) {
  EXPECT_THROW(parse_dataset("5,a,b\n", DataFormat::kAgNews), std::runtime_error);
  EXPECT_THROW(parse_dataset("1,a\n", DataFormat::kAgNews), std::runtime_error);
  EXPECT_THROW(parse_dataset("1,\"a,b\n", DataFormat::kAgNews), std::runtime_error);
}

TEST(LoadTsv, RoundTripsNoisyDataset) {
  TempDir dir;
  auto ds = random_dataset(300, 4, 8);
  ds.examples[3].text = "tab\there\nnew line \\ back\rslash";
  ds.examples[3].text_length = tokenize(ds.examples[3].text).size();
  auto noisy = inject_random(ds, 0.3, 1).dataset;
  write_noisy_dataset(noisy, dir / "n.tsv");
  const auto back = load_dataset(dir / "n.tsv", DataFormat::kTsv, {.num_classes = 4});
  ASSERT_EQ(back.size(), noisy.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back.examples[i].id, noisy.examples[i].id);
    EXPECT_EQ(back.examples[i].noisy_label, noisy.examples[i].noisy_label);
    EXPECT_EQ(back.examples[i].clean_label, noisy.examples[i].clean_label);
    EXPECT_EQ(back.examples[i].text, noisy.examples[i].text);
    EXPECT_EQ(back.examples[i].text_length, noisy.examples[i].text_length);
  }
  write_noisy_dataset(back, dir / "again.tsv");
  EXPECT_EQ(testing::slurp(dir / "n.tsv"), testing::slurp(dir / "again.tsv"));
}

TEST(LoadTsv, Errors) {
  const std::string header = "id\tnoisy_label\tclean_label\ttext\n";
  EXPECT_THROW(parse_dataset("bad header\n", DataFormat::kTsv), std::runtime_error);
  EXPECT_THROW(parse_dataset(header + "0\t1\t1\ta\n0\t1\t1\tb\n", DataFormat::kTsv), std::runtime_error);
  EXPECT_THROW(parse_dataset(header + "0\tx\t1\ta\n", DataFormat::kTsv), std::runtime_error);
  EXPECT_THROW(parse_dataset(header + "0\t1\n", DataFormat::kTsv), std::runtime_error);
  EXPECT_THROW(parse_dataset(header + "0\t1\t-1\ta\n", DataFormat::kTsv), std::runtime_error);
  EXPECT_NO_THROW(parse_dataset(header + "0\t1\t-1\ta\n", DataFormat::kTsv, {.allow_poisoned = true}));
  EXPECT_THROW(parse_dataset(header + "0\t5\t1\ta\n", DataFormat::kTsv, {.num_classes = 3}), std::runtime_error);
}

TEST(LoadDataset, MissingFileNamesPath) {
  try {
    load_dataset("/nonexistent/file.txt", DataFormat::kTrec);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/file.txt"), std::string::npos);
  }
}

TEST(DataFormatNames, ParseAndPrint) {
  for (auto f : {DataFormat::kTrec, DataFormat::kAgNews, DataFormat::kTsv}) {
    EXPECT_EQ(parse_data_format(to_string(f)), f);
  }
  EXPECT_THROW(parse_data_format("xml"), std::invalid_argument);
}

TEST(SplitValidation, Sizes) {
  const auto ds = random_dataset(100, 3, 1);
  const auto parts = split_validation(ds, 0.1, 5);
  EXPECT_EQ(parts.train.size(), 90u);
  EXPECT_EQ(parts.validation.size(), 10u);
  EXPECT_EQ(parts.validation.split, Split::kValidation);
}

TEST(SplitValidation, DeterministicAndDisjoint) {
  const auto ds = random_dataset(500, 3, 1);
  const auto a = split_validation(ds, 0.2, 5);
  const auto b = split_validation(ds, 0.2, 5);
  const auto c = split_validation(ds, 0.2, 6);
  EXPECT_EQ(a.validation.examples, b.validation.examples);
  EXPECT_NE(a.validation.examples, c.validation.examples);
  std::set<std::size_t> ids;
  for (const auto& ex : a.train.examples) ids.insert(ex.id);
  for (const auto& ex : a.validation.examples) EXPECT_FALSE(ids.contains(ex.id));
  EXPECT_EQ(ids.size() + a.validation.size(), ds.size());
  EXPECT_TRUE(std::is_sorted(a.train.examples.begin(), a.train.examples.end(),
                             [](const auto& x, const auto& y) { return x.id < y.id; }));
  EXPECT_EQ(a.train.examples[0], ds.examples[a.train.examples[0].id]);
}

TEST(SplitValidation, QuestionCorpusProportions) {
  SynthOptions opts;
  const auto ds = parse_dataset(make_question_corpus(opts), DataFormat::kTrec);
  ASSERT_EQ(ds.size(), 5452u);
  const auto parts = split_validation(ds, 503.0 / 5452.0, 3);
  EXPECT_EQ(parts.train.size(), 4949u);
  EXPECT_EQ(parts.validation.size(), 503u);
}

TEST(SplitValidation, EmptySplitThrows) {
  const auto ds = random_dataset(5, 2, 1);
  EXPECT_THROW(split_validation(ds, 0.01, 1), std::invalid_argument);
  EXPECT_THROW(split_validation(ds, 0.99, 1), std::invalid_argument);
  EXPECT_THROW(split_validation(ds, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(split_validation(ds, 1.0, 1), std::invalid_argument);
}

TEST(Embeddings, CopiesKnownRowsAndFillsTheRest) {
  TempDir dir;
  testing::spit(dir / "vec.txt", "the 0.1 0.2\nunused 1 1\n");
  const auto vocab = Vocab::build({"the cat"});
  const auto e = load_embeddings(dir / "vec.txt", vocab, 2, 3);
  EXPECT_EQ(e.covered, 1u);
  EXPECT_EQ(e.table.rows(), vocab.size());
  EXPECT_DOUBLE_EQ(e.table(static_cast<std::size_t>(vocab.id("the")), 0), 0.1);
  EXPECT_DOUBLE_EQ(e.table(static_cast<std::size_t>(vocab.id("the")), 1), 0.2);
  for (auto tok : {"cat", "<unk>"}) {
    for (double v : e.table.row(static_cast<std::size_t>(vocab.id(tok)))) {
      EXPECT_GE(v, -0.1);
      EXPECT_LE(v, 0.1);
    }
  }
  const auto again = load_embeddings(dir / "vec.txt", vocab, 2, 3);
  EXPECT_EQ(e.table, again.table);
}

TEST(Embeddings, DimensionMismatchNamesToken) {
  TempDir dir;
  testing::spit(dir / "vec.txt", "the 0.1 0.2\na 0.1\n");
  const auto vocab = Vocab::build({"the a"});
  try {
    load_embeddings(dir / "vec.txt", vocab, 2, 3);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("'a'"), std::string::npos);
  }
}

}  // namespace
}  // namespace denoise
