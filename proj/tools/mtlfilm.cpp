// mtlfilm: command-line driver for the data, feature, training and
// evaluation pipeline. Every subcommand writes <name>.config.json next to its
// outputs with the fully resolved settings it ran with.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mtlfilm/checkpoint.hpp"
#include "mtlfilm/eval.hpp"
#include "mtlfilm/ingest.hpp"
#include "mtlfilm/pipeline.hpp"
#include "mtlfilm/remote_extractor.hpp"
#include "mtlfilm/schema.hpp"
#include "mtlfilm/sentiment.hpp"
#include "mtlfilm/sir_dynamics.hpp"
#include "mtlfilm/synthetic.hpp"

namespace fs = std::filesystem;
using namespace mtlfilm;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitExtractor = 4;
constexpr int kExitTraining = 5;

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kContractViolation:
      return kExitUsage;
    case ErrorCode::kMalformedResponse:
    case ErrorCode::kExtractorUnavailable:
      return kExitExtractor;
    case ErrorCode::kNonFiniteLoss:
    case ErrorCode::kShapeMismatch:
      return kExitTraining;
    default:
      return kExitData;
  }
}

/// Files written by the running subcommand; removed if it fails.
class Outputs {
 public:
  std::string add(const fs::path& p) {
    paths_.push_back(p);
    return p.string();
  }
  void remove_all() const {
    std::error_code ec;
    for (const auto& p : paths_) fs::remove(p, ec);
  }

 private:
  std::vector<fs::path> paths_;
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "cannot write " + path, ErrorCode::kIo);
  out << text;
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "cannot read " + path, ErrorCode::kIo);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaMismatch, path + ": " + e.what());
  }
}

fs::path ensure_dir(const std::string& dir) {
  fs::create_directories(dir);
  return fs::path(dir);
}

std::string mask_string(const features::GroupMask& mask) {
  std::string out;
  for (auto g : mask) {
    if (!out.empty()) out += ",";
    out += std::string(features::to_string(g));
  }
  return out;
}

/// Groups absent from a feature file's schema.
features::GroupMask mask_of(const features::FeatureSchema& schema) {
  features::GroupMask mask;
  for (auto g : {features::FeatureGroup::kSIR, features::FeatureGroup::kSentiment, features::FeatureGroup::kEvents,
                 features::FeatureGroup::kBase}) {
    if (schema.count(g) == 0) mask.insert(g);
  }
  return mask;
}

mtl::NetworkConfig load_network_config(const std::string& path) {
  return path.empty() ? mtl::NetworkConfig{} : mtl::NetworkConfig::from_json(read_json(path));
}

struct LoadedData {
  std::vector<MovieRecord> movies;
  std::vector<Review> reviews;
  std::vector<ingest::Reject> movie_rejects, review_rejects;
};

LoadedData load_inputs(const std::string& movies_path, const std::string& reviews_path, const std::string& salt) {
  LoadedData d;
  auto movies = ingest::load_movies(movies_path);
  d.movies = std::move(movies.records);
  d.movie_rejects = std::move(movies.rejects);
  ingest::ReviewLoadOptions opts;
  if (!salt.empty()) opts.anonymization_salt = salt;
  auto reviews = ingest::load_reviews(reviews_path, d.movies, opts);
  d.reviews = std::move(reviews.records);
  d.review_rejects = std::move(reviews.rejects);
  std::cerr << "loaded " << d.movies.size() << " movies (" << d.movie_rejects.size() << " rejected), "
            << d.reviews.size() << " reviews (" << d.review_rejects.size() << " rejected)\n";
  return d;
}

void write_all_rejects(Outputs& outputs, const fs::path& dir, const LoadedData& d) {
  ingest::write_rejects(outputs.add(dir / "movies.rejects.csv"), d.movie_rejects);
  ingest::write_rejects(outputs.add(dir / "reviews.rejects.csv"), d.review_rejects);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Film success and opening-weekend modeling pipeline"};
  app.require_subcommand(1);
  Outputs outputs;

  // synth ------------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Generate a planted-signal synthetic corpus");
  int synth_n = 1000;
  double synth_signal = 1.0;
  std::uint64_t synth_seed = 7;
  std::string synth_config, synth_out = "data";
  synth->add_option("--n", synth_n, "Number of movies (>= 50)")->capture_default_str();
  synth->add_option("--signal", synth_signal, "Signal strength in [0, 1]")->capture_default_str();
  synth->add_option("--seed", synth_seed, "Random seed")->capture_default_str();
  synth->add_option("--config", synth_config, "Generator parameter JSON")->check(CLI::ExistingFile);
  synth->add_option("--out", synth_out, "Output directory")->capture_default_str();
  synth->callback([&] {
    const auto cfg = synth_config.empty() ? synth::SyntheticConfig{} : synth::load_config(synth_config);
    const auto corpus = synth::generate_synthetic(synth_n, synth_signal, synth_seed, cfg);
    const auto dir = ensure_dir(synth_out);
    ingest::write_movies(outputs.add(dir / "movies.csv"), corpus.movies);
    ingest::write_reviews(outputs.add(dir / "reviews.csv"), corpus.reviews);
    write_json(outputs.add(dir / "synth.config.json"),
               {{"n", synth_n}, {"signal", synth_signal}, {"seed", synth_seed}, {"generator", cfg.to_json()}});
    std::cout << "wrote " << corpus.movies.size() << " movies and " << corpus.reviews.size() << " reviews to "
              << dir.string() << "\n";
  });

  // sir --------------------------------------------------------------------
  auto* sir_cmd = app.add_subcommand("sir", "SIR diffusion utilities");
  sir_cmd->require_subcommand(1);

  auto* simulate = sir_cmd->add_subcommand("simulate", "Integrate the SIR system and write t,s,i,r");
  sir::SIRParams sim_params{0.10, 0.03};
  sir::SIRState sim_initial{0.82, 0.14, 0.04, 0.0};
  double sim_dt = sir::kDefaultDt, sim_horizon = sir::kDefaultHorizon;
  std::string sim_out;
  simulate->add_option("--beta", sim_params.beta, "Contact rate")->capture_default_str();
  simulate->add_option("--gamma", sim_params.gamma, "Recovery rate")->capture_default_str();
  simulate->add_option("--s0", sim_initial.s, "Initial susceptible share")->capture_default_str();
  simulate->add_option("--i0", sim_initial.i, "Initial infected share")->capture_default_str();
  simulate->add_option("--r0", sim_initial.r, "Initial recovered share")->capture_default_str();
  simulate->add_option("--dt", sim_dt, "Step size in days")->capture_default_str();
  simulate->add_option("--horizon", sim_horizon, "Horizon in days")->capture_default_str();
  simulate->add_option("--out", sim_out, "Output CSV (stdout when omitted)");
  simulate->callback([&] {
    require(sim_params.valid(), "--beta must be >= 0 and --gamma > 0");
    const auto traj = sir::simulate(sim_initial, sim_params, sim_dt, sim_horizon);
    std::ostringstream os;
    csv::write_row(os, {"t", "s", "i", "r"});
    for (const auto& st : traj.states) {
      csv::write_row(os, {csv::format_double(st.t), csv::format_double(st.s), csv::format_double(st.i),
                          csv::format_double(st.r)});
    }
    if (sim_out.empty()) {
      std::cout << os.str();
    } else {
      write_text(outputs.add(sim_out), os.str());
      write_json(outputs.add(sim_out + ".config.json"),
                 {{"beta", sim_params.beta}, {"gamma", sim_params.gamma}, {"s0", sim_initial.s},
                  {"i0", sim_initial.i}, {"r0", sim_initial.r}, {"dt", sim_dt}, {"horizon", sim_horizon}});
    }
  });

  auto* fit = sir_cmd->add_subcommand("fit", "Estimate per-movie SIR parameters from review timelines");
  std::string fit_movies, fit_reviews, fit_out;
  fit->add_option("--movies", fit_movies, "movies.csv")->required()->check(CLI::ExistingFile);
  fit->add_option("--reviews", fit_reviews, "reviews.csv")->required()->check(CLI::ExistingFile);
  fit->add_option("--out", fit_out, "Output CSV")->required();
  fit->callback([&] {
    const auto data = load_inputs(fit_movies, fit_reviews, "");
    std::map<std::string, std::vector<Review>> by_movie;
    for (const auto& r : data.reviews) by_movie[r.movie_id].push_back(r);
    std::ostringstream os;
    csv::write_row(os, {"movie_id", "s0", "i0", "r0", "beta", "gamma", "gamma_floored", "basic_reproduction_number",
                        "status"});
    for (const auto& m : data.movies) {
      const auto it = by_movie.find(m.movie_id);
      if (it == by_movie.end()) {
        csv::write_row(os, {m.movie_id, "NA", "NA", "NA", "NA", "NA", "NA", "NA", "no_reviews"});
        continue;
      }
      const auto counts = sir::count_timeline(build_timeline(it->second));
      if (counts.first_week_commenters + counts.first_week_negative_reviewers > counts.total_reviewers) {
        csv::write_row(os, {m.movie_id, "NA", "NA", "NA", "NA", "NA", "NA", "NA", "inconsistent_counts"});
        continue;
      }
      const auto s = sir::estimate_initial_conditions(counts);
      const auto rates = sir::estimate_rates(counts);
      csv::write_row(os, {m.movie_id, csv::format_double(s.s), csv::format_double(s.i), csv::format_double(s.r),
                          csv::format_double(rates.params.beta), csv::format_double(rates.params.gamma),
                          rates.gamma_floored ? "1" : "0",
                          csv::format_double(rates.params.beta / rates.params.gamma), "ok"});
    }
    write_text(outputs.add(fit_out), os.str());
    write_json(outputs.add(fit_out + ".config.json"), {{"movies", fit_movies}, {"reviews", fit_reviews}});
  });

  // sentiment --------------------------------------------------------------
  auto* sent = app.add_subcommand("sentiment", "Sentiment extraction");
  sent->require_subcommand(1);
  auto* extract = sent->add_subcommand("extract", "Score every review and write JSON lines");
  std::string ex_movies, ex_reviews, ex_out, ex_mode = "stub", ex_endpoint = sentiment::RemoteConfig{}.base_url;
  std::string ex_model = sentiment::RemoteConfig{}.model;
  int ex_interval_ms = 1000, ex_retries = 2;
  bool ex_no_fallback = false;
  extract->add_option("--movies", ex_movies, "movies.csv")->required()->check(CLI::ExistingFile);
  extract->add_option("--reviews", ex_reviews, "reviews.csv")->required()->check(CLI::ExistingFile);
  extract->add_option("--out", ex_out, "Output JSON-lines file")->required();
  extract->add_option("--extractor", ex_mode, "stub or remote")
      ->check(CLI::IsMember({"stub", "remote"}))
      ->capture_default_str();
  extract->add_option("--endpoint", ex_endpoint, "Remote base URL")->capture_default_str();
  extract->add_option("--model", ex_model, "Remote model name")->capture_default_str();
  extract->add_option("--min-interval-ms", ex_interval_ms, "Minimum spacing between remote requests")
      ->capture_default_str();
  extract->add_option("--retries", ex_retries, "Retries per review before falling back")->capture_default_str();
  extract->add_flag("--no-fallback", ex_no_fallback, "Fail instead of falling back to the offline lexicon");
  extract->callback([&] {
    const auto data = load_inputs(ex_movies, ex_reviews, "");
    std::unique_ptr<sentiment::Extractor> extractor;
    if (ex_mode == "remote") {
      sentiment::RemoteConfig rc;
      rc.base_url = ex_endpoint;
      rc.model = ex_model;
      rc.min_request_interval = std::chrono::milliseconds(ex_interval_ms);
      extractor = std::make_unique<sentiment::RemoteExtractor>(rc);
    } else {
      extractor = std::make_unique<sentiment::StubExtractor>();
    }
    const sentiment::ExtractPolicy policy{ex_retries, !ex_no_fallback};
    const auto records = pipeline::score_reviews(data.movies, data.reviews, *extractor, policy);
    sentiment::write_jsonl(outputs.add(ex_out), records);
    std::size_t fallbacks = 0;
    for (const auto& r : records) fallbacks += r.vector.fallback_used ? 1 : 0;
    write_json(outputs.add(ex_out + ".config.json"),
               {{"movies", ex_movies}, {"reviews", ex_reviews}, {"extractor", ex_mode}, {"endpoint", ex_endpoint},
                {"model", ex_model}, {"min_interval_ms", ex_interval_ms}, {"retries", ex_retries},
                {"fallback", !ex_no_fallback}});
    std::cout << "scored " << records.size() << " reviews (" << fallbacks << " via fallback)\n";
  });

  // featurize --------------------------------------------------------------
  auto* feat = app.add_subcommand("featurize", "Build raw and model-ready feature tables");
  std::string ft_movies, ft_reviews, ft_sentiment, ft_mask, ft_out = "features", ft_salt;
  std::uint64_t ft_seed = 7;
  double ft_ratio = 0.8;
  sentiment::AggregationConfig ft_agg;
  feat->add_option("--movies", ft_movies, "movies.csv")->required()->check(CLI::ExistingFile);
  feat->add_option("--reviews", ft_reviews, "reviews.csv")->required()->check(CLI::ExistingFile);
  feat->add_option("--sentiment", ft_sentiment, "JSON lines from `sentiment extract` (offline lexicon if omitted)")
      ->check(CLI::ExistingFile);
  feat->add_option("--mask", ft_mask, "Comma-separated groups to drop: SIR,Sentiment,Events");
  feat->add_option("--seed", ft_seed, "Split seed")->capture_default_str();
  feat->add_option("--train-ratio", ft_ratio, "Stratified train share")->capture_default_str();
  feat->add_option("--lambda-decay", ft_agg.lambda_decay, "Sentiment decay per day")->capture_default_str();
  feat->add_option("--salt", ft_salt, "Anonymize review authors with this key");
  feat->add_option("--out", ft_out, "Output directory")->capture_default_str();
  feat->callback([&] {
    const auto mask = features::parse_mask(ft_mask);
    const auto data = load_inputs(ft_movies, ft_reviews, ft_salt);
    const auto dir = ensure_dir(ft_out);
    write_all_rejects(outputs, dir, data);
    std::map<std::string, double> scores;
    if (!ft_sentiment.empty()) scores = pipeline::score_map(sentiment::read_jsonl(ft_sentiment));
    pipeline::BuildOptions bo;
    bo.aggregation = ft_agg;
    pipeline::BuildReport report;
    const auto all_rows = pipeline::build_raw_rows(data.movies, data.reviews, scores, bo, &report);
    const auto rows = pipeline::labelable(all_rows);
    const auto labels = pipeline::stratification_labels(rows);
    const auto plan = eval::stratified_split(labels, ft_ratio, ft_seed);
    const auto prep = pipeline::Preprocessor::fit(rows, plan.train);
    const auto schema = features::canonical_schema().without(mask);

    std::vector<std::string> split(rows.size(), "train");
    for (auto i : plan.test) split[i] = "test";
    std::vector<pipeline::LabeledRow> out_rows;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto fv = prep.transform(rows[i]);
      out_rows.push_back({rows[i].movie_id, split[i], fv.label, fv.target, pipeline::assemble(fv, mask)});
    }
    pipeline::write_raw_csv(outputs.add(dir / "raw.csv"), rows);
    pipeline::write_features_csv(outputs.add(dir / "features.csv"), schema, out_rows);
    write_json(outputs.add(dir / "schema.json"), schema.to_json());
    write_json(outputs.add(dir / "preprocessor.json"), prep.to_json());
    write_json(outputs.add(dir / "featurize.config.json"),
               {{"movies", ft_movies},
                {"reviews", ft_reviews},
                {"sentiment", ft_sentiment.empty() ? json(nullptr) : json(ft_sentiment)},
                {"mask", mask_string(mask)},
                {"seed", ft_seed},
                {"train_ratio", ft_ratio},
                {"aggregation", {{"lambda_decay", ft_agg.lambda_decay}, {"weight_smoothing", ft_agg.weight_smoothing}}},
                {"sir", {{"dt", bo.dt}, {"horizon", bo.horizon}}},
                {"anonymized", !ft_salt.empty()},
                {"report",
                 {{"movies", report.movies},
                  {"unlabeled", all_rows.size() - rows.size()},
                  {"without_reviews", report.without_reviews},
                  {"inconsistent_timelines", report.inconsistent_timelines},
                  {"gamma_floored", report.gamma_floored}}}});
    std::cout << "featurized " << rows.size() << " movies into " << schema.size() << " features ("
              << plan.train.size() << " train, " << plan.test.size() << " test)\n";
  });

  // train ------------------------------------------------------------------
  auto* train = app.add_subcommand("train", "Train the multi-task network on the train split");
  std::string tr_features, tr_config, tr_out = "model";
  std::uint64_t tr_seed = 0;
  train->add_option("--features", tr_features, "features.csv from featurize")->required()->check(CLI::ExistingFile);
  train->add_option("--config", tr_config, "Network config JSON (defaults when omitted)")->check(CLI::ExistingFile);
  auto* tr_seed_opt = train->add_option("--seed", tr_seed, "Override the config seed");
  train->add_option("--out", tr_out, "Output directory")->capture_default_str();
  train->callback([&] {
    auto cfg = load_network_config(tr_config);
    if (*tr_seed_opt) cfg.seed = tr_seed;
    const auto file = pipeline::read_features_csv(tr_features);
    const auto data = file.dataset("train");
    const auto [fit_set, val_set] = eval::carve_validation(data, cfg.seed);
    const auto result = mtl::train(fit_set, val_set, cfg);
    const auto dir = ensure_dir(tr_out);
    json meta{{"features", json::array()}, {"mask", mask_string(mask_of(file.schema))}};
    for (const auto& e : file.schema.entries()) meta["features"].push_back(e.name);
    mtl::save_checkpoint(result.params, cfg, outputs.add(dir / "checkpoint.json"), meta);
    write_text(outputs.add(dir / "train_report.csv"), result.report.to_csv());
    write_json(outputs.add(dir / "train.config.json"),
               {{"features", tr_features},
                {"network", cfg.to_json()},
                {"validation_fraction", eval::kValidationFraction},
                {"best_epoch", result.report.best_epoch},
                {"epochs_run", result.report.epochs.size()},
                {"stop_reason", result.report.stop_reason == mtl::StopReason::kEarlyStopping ? "early_stopping"
                                                                                             : "max_epochs"}});
    std::cout << "trained " << result.report.epochs.size() << " epochs, best " << result.report.best_epoch
              << ", u_c=" << result.report.final_u_clf << " u_r=" << result.report.final_u_reg << "\n";
  });

  // evaluate ---------------------------------------------------------------
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a checkpoint (held-out test or 10-fold CV)");
  std::string ev_checkpoint, ev_features, ev_split = "test", ev_raw, ev_out = "eval";
  evaluate->add_option("--checkpoint", ev_checkpoint, "checkpoint.json")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--features", ev_features, "features.csv from featurize")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--split", ev_split, "test or cv10")
      ->check(CLI::IsMember({"test", "cv10"}))
      ->capture_default_str();
  evaluate->add_option("--raw", ev_raw, "raw.csv for cv10 (defaults to the one beside --features)");
  evaluate->add_option("--out", ev_out, "Output directory")->capture_default_str();
  evaluate->callback([&] {
    const auto file = pipeline::read_features_csv(ev_features);
    const auto ck = mtl::load_checkpoint(ev_checkpoint, file.schema.size());
    const auto dir = ensure_dir(ev_out);
    json resolved{{"checkpoint", ev_checkpoint}, {"features", ev_features}, {"split", ev_split}};
    if (ev_split == "test") {
      const auto report = eval::evaluate(file.dataset("test"), ck.params, ck.config);
      const std::vector<std::pair<std::string, eval::EvalReport>> rows = {{"MTL (test)", report}};
      write_text(outputs.add(dir / "eval_report.csv"), eval::reports_csv(rows));
      std::cout << eval::reports_table(rows);
    } else {
      const auto raw_path = ev_raw.empty() ? (fs::path(ev_features).parent_path() / "raw.csv").string() : ev_raw;
      const auto rows = pipeline::read_raw_csv(raw_path);
      const auto mask = mask_of(file.schema);
      const auto cv = eval::cross_validate(rows, 10, ck.config.seed, mask, ck.config);
      resolved["raw"] = raw_path;
      resolved["network"] = ck.config.to_json();
      write_text(outputs.add(dir / "eval_report.csv"), eval::cv_csv(cv));
      std::cout << eval::cv_table(cv);
    }
    write_json(outputs.add(dir / "evaluate.config.json"), resolved);
  });

  // ablate -----------------------------------------------------------------
  auto* ablate = app.add_subcommand("ablate", "Retrain with each feature group removed");
  std::string ab_raw, ab_config, ab_out = "ablation";
  std::uint64_t ab_seed = 7;
  double ab_ratio = 0.8;
  ablate->add_option("--raw", ab_raw, "raw.csv from featurize")->required()->check(CLI::ExistingFile);
  ablate->add_option("--config", ab_config, "Network config JSON")->check(CLI::ExistingFile);
  ablate->add_option("--seed", ab_seed, "Split and training seed")->capture_default_str();
  ablate->add_option("--train-ratio", ab_ratio, "Stratified train share")->capture_default_str();
  ablate->add_option("--out", ab_out, "Output directory")->capture_default_str();
  ablate->callback([&] {
    auto cfg = load_network_config(ab_config);
    cfg.seed = ab_seed;
    const auto rows = pipeline::read_raw_csv(ab_raw);
    const auto plan = eval::stratified_split(pipeline::stratification_labels(rows), ab_ratio, ab_seed);
    const auto result = eval::run_ablation(rows, eval::standard_ablation_specs(), plan, cfg);
    const auto dir = ensure_dir(ab_out);
    write_text(outputs.add(dir / "ablation.csv"), eval::ablation_csv(result));
    write_json(outputs.add(dir / "ablate.config.json"),
               {{"raw", ab_raw}, {"seed", ab_seed}, {"train_ratio", ab_ratio}, {"network", cfg.to_json()}});
    std::cout << eval::ablation_table(result);
  });

  // predict ----------------------------------------------------------------
  auto* predict = app.add_subcommand("predict", "Score movies with a trained checkpoint");
  std::string pr_checkpoint, pr_features, pr_split, pr_out = "predictions.csv";
  predict->add_option("--checkpoint", pr_checkpoint, "checkpoint.json")->required()->check(CLI::ExistingFile);
  predict->add_option("--features", pr_features, "features.csv")->required()->check(CLI::ExistingFile);
  predict->add_option("--split", pr_split, "Only rows of this split (all rows when omitted)");
  predict->add_option("--out", pr_out, "Output CSV")->capture_default_str();
  predict->callback([&] {
    const auto file = pipeline::read_features_csv(pr_features);
    const auto ck = mtl::load_checkpoint(pr_checkpoint, file.schema.size());
    std::ostringstream os;
    csv::write_row(os, {"movie_id", "success_probability", "decision", "revenue_scaled"});
    for (const auto& r : file.rows) {
      if (!pr_split.empty() && r.split != pr_split) continue;
      const auto p = mtl::predict(r.values, ck.params, ck.config);
      csv::write_row(os, {r.movie_id, csv::format_double(p.success_probability), std::to_string(p.decision),
                          csv::format_double(p.revenue_scaled)});
    }
    write_text(outputs.add(pr_out), os.str());
    write_json(outputs.add(pr_out + ".config.json"),
               {{"checkpoint", pr_checkpoint}, {"features", pr_features}, {"split", pr_split}});
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << json{{"error", "Usage"}, {"exit_code", kExitUsage}, {"message", e.what()}}.dump() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    outputs.remove_all();
    const int code = exit_code_for(e.code());
    std::cerr << json{{"error", std::string(to_string(e.code()))}, {"exit_code", code}, {"message", e.what()}}.dump()
              << "\n";
    return code;
  } catch (const std::exception& e) {
    outputs.remove_all();
    std::cerr << json{{"error", "Internal"}, {"exit_code", kExitData}, {"message", e.what()}}.dump() << "\n";
    return kExitData;
  }
  return kExitOk;
}
