#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <unistd.h>

#include "mtlfilm/ingest.hpp"
#include "mtlfilm/mtl_net.hpp"
#include "mtlfilm/pipeline.hpp"
#include "mtlfilm/pipeline_state.hpp"
#include "mtlfilm/synthetic.hpp"
#include "support/expect_code.hpp"
#include "support/pipeline_oracle.hpp"

using namespace mtlfilm;
using namespace mtlfilm::ingest;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = std::filesystem::temp_directory_path() /
            ("mtlfilm_ingest_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  static inline int counter_ = 0;
  std::filesystem::path path_;
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

const char* kMovieHeader =
    "Movie_ID,Title,Director,Writers,Gross_Worldwide,Opening_Weekend,Budget,Language,Country,Filming_Locations,"
    "Production_Companies,Release_Day,Release_Month,Release_Year,Runtime\n";

const char* kReviewHeader = "Movie_ID,Review_Author,Review_Date,Review_Title,Review_Body,Upvotes,Total_Votes,Rating\n";

}  // namespace

TEST(LoadMovies, ParsesAmountsAndOptionalBudget) {
  TempDir dir;
  write_text(dir.file("m.csv"), std::string(kMovieHeader) +
                                    "t1,\"Big, Film\",Dir A,W1;W2,\"$1,200,000\",500000,N/A,English;French,US,"
                                    "LA,Studio A;Studio B,12,6,2015,101\n");
  const auto res = load_movies(dir.file("m.csv"));
  ASSERT_EQ(res.records.size(), 1u);
  const auto& m = res.records[0];
  EXPECT_EQ(m.title, "Big, Film");
  EXPECT_EQ(m.writers, (std::vector<std::string>{"W1", "W2"}));
  EXPECT_EQ(*m.gross_worldwide, 1'200'000.0);
  EXPECT_FALSE(m.budget.has_value());
  EXPECT_EQ(m.languages.size(), 2u);
  EXPECT_EQ(m.release_year, 2015);
  EXPECT_EQ(*m.release_month, 6);
}

TEST(LoadMovies, MissingColumnNamed) {
  TempDir dir;
  std::string header = kMovieHeader;
  header.replace(header.find("Budget,"), 7, "");
  write_text(dir.file("m.csv"), header);
  try {
    load_movies(dir.file("m.csv"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchemaMismatch);
    EXPECT_NE(std::string(e.what()).find("Budget"), std::string::npos);
  }
}

TEST(LoadMovies, HeaderIsCaseInsensitiveAndEmptyFileOk) {
  TempDir dir;
  std::string header = kMovieHeader;
  for (auto& c : header) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  write_text(dir.file("m.csv"), header);
  const auto res = load_movies(dir.file("m.csv"));
  EXPECT_TRUE(res.records.empty());
  EXPECT_EQ(res.total_rows, 0u);
}

TEST(LoadMovies, RejectsCountedNeverDropped) {
  TempDir dir;
  write_text(dir.file("m.csv"), std::string(kMovieHeader) +
                                    "a,A,D,W,1,1,1,English,US,X,S,1,1,2010,90\n"
                                    "b,B,D,W,1,1,-5,English,US,X,S,1,1,2010,90\n"
                                    "c,C,D,W,1,1,1,English,US,X,S,1,13,2010,90\n"
                                    "a,dup,D,W,1,1,1,English,US,X,S,1,1,2010,90\n"
                                    "d,D,D,W,1,1\n"
                                    "e,E,D,W,1,1,1,English,US,X,S,1,1,,90\n"
                                    "f,F,D,W,1,1,1,English,US,X,S,1,1,2011,0\n"
                                    "g,G,D,W,1,1,1,English,US,X,S,,,2012,\n");
  const auto res = load_movies(dir.file("m.csv"));
  EXPECT_EQ(res.total_rows, 8u);
  EXPECT_EQ(res.records.size() + res.rejects.size(), res.total_rows);
  EXPECT_EQ(res.records.size(), 2u);
  EXPECT_EQ(res.rejects.front().line, 3u);
  write_rejects(dir.file("rejects.csv"), res.rejects);
  EXPECT_NE(read_text(dir.file("rejects.csv")).find("Budget must be >= 0"), std::string::npos);
}

TEST(LoadReviews, DaysSinceReleaseAndWindow) {
  TempDir dir;
  write_text(dir.file("m.csv"), std::string(kMovieHeader) + "a,A,D,W,1,1,1,English,US,X,S,10,3,2018,90\n");
  write_text(dir.file("r.csv"), std::string(kReviewHeader) +
                                    "a,alice,2018-03-17,t,good,3,4,8\n"
                                    "a,bob,2018-02-20,t,early,0,0,\n"
                                    "a,carol,2017-12-01,t,too early,0,0,5\n"
                                    "zz,dave,2018-03-11,t,unknown film,0,0,5\n"
                                    "a,erin,2018-03-12,t,bad votes,5,2,5\n"
                                    "a,frank,2018-03-12,t,bad rating,0,0,11\n");
  const auto movies = load_movies(dir.file("m.csv")).records;
  const auto res = load_reviews(dir.file("r.csv"), movies);
  ASSERT_EQ(res.records.size(), 2u);
  EXPECT_EQ(res.records[0].days_since_release, 7.0);
  EXPECT_EQ(res.records[1].days_since_release, 0.0);
  EXPECT_FALSE(res.records[1].user_rating.has_value());
  EXPECT_EQ(res.records[0].review_id, "a#0");
  EXPECT_EQ(res.rejects.size(), 4u);
  EXPECT_EQ(res.records.size() + res.rejects.size(), res.total_rows);
}

TEST(LoadReviews, OptionalScoreColumnsAndAnonymization) {
  TempDir dir;
  write_text(dir.file("m.csv"), std::string(kMovieHeader) + "a,A,D,W,1,1,1,English,US,X,S,10,3,2018,90\n");
  write_text(dir.file("r.csv"),
             "Movie_ID,Review_Author,Review_Date,Review_Title,Review_Body,Upvotes,Total_Votes,Rating,Sentiment_Score,"
             "Emotion_Keywords\na,alice,2018-03-17,t,good,3,4,8,7.5,happy;tense\n");
  const auto movies = load_movies(dir.file("m.csv")).records;
  ReviewLoadOptions opts;
  opts.anonymization_salt = "pepper";
  const auto res = load_reviews(dir.file("r.csv"), movies, opts);
  ASSERT_EQ(res.records.size(), 1u);
  EXPECT_EQ(*res.records[0].sentiment_score, 7.5);
  EXPECT_EQ(res.records[0].emotion_keywords, (std::vector<std::string>{"happy", "tense"}));
  EXPECT_EQ(res.records[0].author_id, anonymize_author("alice", "pepper"));
}

TEST(Anonymize, StableKeyedOpaque) {
  EXPECT_EQ(anonymize_author("Jane Doe", "s1"), anonymize_author("Jane Doe", "s1"));
  EXPECT_NE(anonymize_author("Jane Doe", "s1"), anonymize_author("Jane Doe", "s2"));
  EXPECT_NE(anonymize_author("Jane Doe", "s1"), anonymize_author("John Doe", "s1"));
  const auto id = anonymize_author("janedoe", "s1");
  for (std::size_t len = 3; len <= 7; ++len)
    for (std::size_t k = 0; k + len <= 7; ++k) EXPECT_EQ(id.find(std::string("janedoe").substr(k, len)), std::string::npos);
  EXPECT_ERROR_CODE(anonymize_author("x", ""), ErrorCode::kContractViolation);
}

TEST(RoundTrip, SyntheticCorpusThroughCsv) {
  TempDir dir;
  const auto corpus = synth::generate_synthetic(60, 1.0, 3);
  write_movies(dir.file("m.csv"), corpus.movies);
  write_reviews(dir.file("r.csv"), corpus.reviews);
  const auto movies = load_movies(dir.file("m.csv"));
  EXPECT_TRUE(movies.rejects.empty());
  EXPECT_EQ(movies.records, corpus.movies);
  const auto reviews = load_reviews(dir.file("r.csv"), movies.records);
  EXPECT_TRUE(reviews.rejects.empty());
  EXPECT_EQ(reviews.records, corpus.reviews);
}

TEST(PipelineState, FreshStaleAndCorrupt) {
  TempDir dir;
  write_text(dir.file("in.csv"), "a,b\n1,2\n");
  const auto state_path = dir.file("state.json");
  EXPECT_EQ(PipelineState::load(state_path).stale_stages({"load", "featurize"}).size(), 2u);

  PipelineState s;
  s.mark_complete("load", {dir.file("in.csv")});
  s.mark_complete("featurize", {dir.file("in.csv")});
  s.register_seed("split", 7);
  s.save(state_path);
  const auto back = PipelineState::load(state_path);
  EXPECT_TRUE(back.stale_stages({"load", "featurize"}).empty());
  EXPECT_EQ(back.seeds().at("split"), 7u);

  write_text(dir.file("in.csv"), "a,b\n1,3\n");
  EXPECT_EQ(back.stale_stages({"load"}), std::vector<std::string>{"load"});

  auto text = read_text(state_path);
  text.replace(text.find("\"split\": 7"), 10, "\"split\": 8");
  write_text(state_path, text);
  EXPECT_ERROR_CODE(PipelineState::load(state_path), ErrorCode::kCorruptState);
  write_text(state_path, "{not json");
  EXPECT_ERROR_CODE(PipelineState::load(state_path), ErrorCode::kCorruptState);
}

TEST(Synthetic, DeterministicPerSeed) {
  const auto a = synth::generate_synthetic(80, 0.7, 11);
  const auto b = synth::generate_synthetic(80, 0.7, 11);
  const auto c = synth::generate_synthetic(80, 0.7, 12);
  EXPECT_EQ(a.movies, b.movies);
  EXPECT_EQ(a.reviews, b.reviews);
  EXPECT_NE(a.reviews, c.reviews);
  EXPECT_ERROR_CODE(synth::generate_synthetic(10, 0.5, 1), ErrorCode::kContractViolation);
  EXPECT_ERROR_CODE(synth::generate_synthetic(100, 1.5, 1), ErrorCode::kContractViolation);
}

TEST(Synthetic, TimelinesSatisfyInvariants) {
  const auto corpus = synth::generate_synthetic(100, 1.0, 13);
  std::map<std::string, std::vector<sir::TimelineEntry>> by_movie;
  for (const auto& r : corpus.reviews) {
    EXPECT_GE(r.days_since_release, 0.0);
    by_movie[r.movie_id].push_back({r.days_since_release, false, r.author_id});
  }
  EXPECT_EQ(by_movie.size(), corpus.movies.size());
  for (const auto& [id, entries] : by_movie) {
    const auto c = sir::count_timeline(sir::ReviewTimeline(entries));
    EXPECT_GT(c.total_reviewers, 0u);
    EXPECT_LE(c.total_reviewers, c.total_comments);
  }
}

TEST(Synthetic, SuccessfulFilmsAreMoreViral) {
  // Films whose gamma hit the floor have R0 ~ 1e5 and would swamp the mean,
  // so the comparison is over films with at least one first-week negative.
  const auto corpus = synth::generate_synthetic(400, 1.0, 14);
  const auto rows = pipeline::labelable(pipeline::build_raw_rows(corpus.movies, corpus.reviews, {}));
  const auto labels = pipeline::stratification_labels(rows);
  double sum[2] = {0, 0}, n[2] = {0, 0};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].gamma || *rows[i].gamma <= sir::kGammaFloor) continue;
    sum[labels[i]] += *rows[i].basic_reproduction_number;
    n[labels[i]] += 1;
  }
  ASSERT_GT(n[0], 20);
  ASSERT_GT(n[1], 20);
  EXPECT_GT(sum[1] / n[1], sum[0] / n[0]);
}

TEST(Synthetic, NoSignalDefeatsTheOracle) {
  const auto corpus = synth::generate_synthetic(600, 0.0, 15);
  const auto rows = pipeline::labelable(pipeline::build_raw_rows(corpus.movies, corpus.reviews, {}));
  EXPECT_LE(oracle::logistic_test_accuracy(rows, 15), 0.6);
}

TEST(Synthetic, ConfigFileMatchesDefaults) {
  const auto loaded = synth::load_config(std::string(MTLFILM_SOURCE_DIR) + "/config/synthetic.json");
  EXPECT_EQ(loaded.to_json(), synth::SyntheticConfig{}.to_json());
  std::ifstream in(std::string(MTLFILM_SOURCE_DIR) + "/config/train.json");
  EXPECT_EQ(mtl::NetworkConfig::from_json(nlohmann::json::parse(in)).to_json(), mtl::NetworkConfig{}.to_json());
}

TEST(RawRows, CsvRoundTripPreservesMissing) {
  TempDir dir;
  const auto corpus = synth::generate_synthetic(60, 1.0, 16);
  auto rows = pipeline::build_raw_rows(corpus.movies, corpus.reviews, {});
  rows[0].budget.reset();
  rows[1].i0_s0_ratio.reset();
  pipeline::write_raw_csv(dir.file("raw.csv"), rows);
  const auto back = pipeline::read_raw_csv(dir.file("raw.csv"));
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(back[i], rows[i]) << i;
}
