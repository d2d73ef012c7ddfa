// Command-line front end for the crashcast library.

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <thread>

#include "crashcast/error.hpp"
#include "crashcast/evaluation/evaluation.hpp"
#include "crashcast/hyperopt/hyperopt.hpp"
#include "crashcast/labeled_set.hpp"
#include "crashcast/model_bundle.hpp"
#include "crashcast/pipeline/imputation.hpp"
#include "crashcast/pipeline/quality.hpp"
#include "crashcast/pipeline/synthetic.hpp"
#include "crashcast/record_csv.hpp"
#include "crashcast/resampling/resampling.hpp"
#include "crashcast/service/http_api.hpp"
#include "crashcast/service/load_test.hpp"
#include "crashcast/service/prediction_service.hpp"

namespace {

using namespace crashcast;
using nlohmann::json;

void write_json(const std::string& path, const json& doc) {
  if (path.empty() || path == "-") {
    std::cout << doc.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kUnreadableFile, "cannot write " + path);
  out << doc.dump(2) << '\n';
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kUnreadableFile, "cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kMalformedDocument, path + ": " + e.what());
  }
}

// Reads records, reporting malformed rows on stderr.
std::vector<CrashRecord> read_records(const std::string& path) {
  auto result = pipeline::ingest_csv(path);
  for (const auto& e : result.errors) std::cerr << path << ':' << e.line << ": " << e.message << '\n';
  return std::move(result.records);
}

LabeledSet featurize(const features::FeatureContext& ctx, std::span<const CrashRecord> records) {
  std::vector<CrashRecord> labelled;
  for (const auto& r : records) {
    if (r.severity) labelled.push_back(r);
  }
  LabeledSet set;
  for (auto name : features::feature_names()) set.feature_names.emplace_back(name);
  set.x = ctx.assemble_all(labelled);
  for (const auto& r : labelled) set.y.push_back(static_cast<int>(*r.severity));
  return set;
}

boosting::BoosterVariant parse_variant(const std::string& name) {
  return name == "leafwise" ? boosting::BoosterVariant::kLeafwise : boosting::BoosterVariant::kDepthwise;
}

std::atomic<bool> g_stop{false};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crashcast: crash severity risk modelling and serving"};
  app.require_subcommand(1);

  // generate
  std::size_t gen_n = 59496;
  std::uint64_t gen_seed = 42;
  std::string gen_out;
  auto* generate = app.add_subcommand("generate", "Write a synthetic crash-record CSV");
  generate->add_option("--n", gen_n, "Number of records")->capture_default_str();
  generate->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();
  generate->add_option("--out", gen_out, "Output CSV")->required();

  // validate
  std::string val_in, val_report, val_out, val_group = "COUNTY";
  double val_k = 3.0;
  auto* validate = app.add_subcommand("validate", "Quality-check a record CSV");
  validate->add_option("--in", val_in, "Input CSV")->required();
  validate->add_option("--report", val_report, "ValidationReport JSON")->required();
  validate->add_option("--out", val_out, "Retained records CSV");
  validate->add_option("--k", val_k, "Control-limit width in sigmas")->capture_default_str();
  validate->add_option("--group-by", val_group, "Grouping field for control limits")->capture_default_str();

  // impute
  std::string imp_in, imp_out, imp_report;
  double imp_mask = 0.0;
  std::uint64_t imp_seed = 42;
  auto* impute = app.add_subcommand("impute", "Fill missing numeric and categorical fields");
  impute->add_option("--in", imp_in, "Input CSV")->required();
  impute->add_option("--out", imp_out, "Completed CSV")->required();
  impute->add_option("--eval-mask", imp_mask, "Fraction of known cells to mask and score (0 skips)")
      ->check(CLI::Range(0.0, 1.0));
  impute->add_option("--report", imp_report, "MaskedEvalReport JSON (stdout when omitted)");
  impute->add_option("--seed", imp_seed, "Masking seed")->capture_default_str();

  // features
  std::string feat_in, feat_out, feat_context;
  auto* featcmd = app.add_subcommand("features", "Fit the feature context and write a features CSV");
  featcmd->add_option("--in", feat_in, "Record CSV")->required();
  featcmd->add_option("--out", feat_out, "Features CSV with a trailing SEVERITY column")->required();
  featcmd->add_option("--context", feat_context, "Fitted feature context JSON");

  // resample
  std::string res_in, res_under, res_over, res_out, res_report;
  std::uint64_t res_seed = 42;
  std::size_t res_k = 5;
  auto* resample = app.add_subcommand("resample", "Undersample then SMOTE-oversample a features CSV");
  resample->add_option("--in", res_in, "Features CSV")->required();
  resample->add_option("--under", res_under, "Undersampling targets JSON, e.g. {\"0\": 15000}")->required();
  resample->add_option("--over", res_over, "Oversampling targets JSON")->required();
  resample->add_option("--seed", res_seed, "Seed")->capture_default_str();
  resample->add_option("--k", res_k, "SMOTE neighbors")->capture_default_str();
  resample->add_option("--out", res_out, "Balanced features CSV")->required();
  resample->add_option("--report", res_report, "ResampleReport JSON")->required();

  // train
  std::string train_in, train_out, train_report;
  std::uint64_t train_seed = 42;
  bool train_balance = false;
  auto* train = app.add_subcommand("train", "Train a model bundle with the preset boosters");
  train->add_option("--in", train_in, "Record CSV")->required();
  train->add_option("--out", train_out, "Model bundle JSON")->required();
  train->add_option("--report", train_report, "TrainReport JSON");
  train->add_option("--seed", train_seed, "Seed")->capture_default_str();
  train->add_flag("--balance", train_balance, "Apply the reference two-stage balancing to the training split");

  // tune
  std::string tune_variant = "depthwise", tune_train, tune_out, tune_history;
  std::size_t tune_budget = 20;
  std::uint64_t tune_seed = 42;
  auto* tune = app.add_subcommand("tune", "Random-search booster hyperparameters and train the best bundle");
  tune->add_option("--variant", tune_variant, "Booster to tune")
      ->check(CLI::IsMember({"depthwise", "leafwise"}))
      ->capture_default_str();
  tune->add_option("--budget", tune_budget, "Number of trials")->capture_default_str();
  tune->add_option("--seed", tune_seed, "Seed")->capture_default_str();
  tune->add_option("--train", tune_train, "Record CSV")->required();
  tune->add_option("--out", tune_out, "Model bundle JSON")->required();
  tune->add_option("--history", tune_history, "Trial history JSON")->required();

  // evaluate
  std::string ev_model, ev_data, ev_mode = "random", ev_report;
  std::size_t ev_folds = 5;
  std::uint64_t ev_seed = 42;
  auto* evaluate = app.add_subcommand("evaluate", "K-fold cross-validation with the bundle's configuration");
  evaluate->add_option("--model", ev_model, "Model bundle JSON")->required();
  evaluate->add_option("--data", ev_data, "Record CSV")->required();
  evaluate->add_option("--folds", ev_folds, "Number of folds")->capture_default_str();
  evaluate->add_option("--mode", ev_mode, "Fold assignment")
      ->check(CLI::IsMember({"random", "geo"}))
      ->capture_default_str();
  evaluate->add_option("--seed", ev_seed, "Seed")->capture_default_str();
  evaluate->add_option("--report", ev_report, "CV report JSON")->required();

  // weather
  std::string wx_start = "2024-01-15T00:00:00Z", wx_out;
  int wx_hours = 72;
  std::uint64_t wx_seed = 42;
  auto* weather = app.add_subcommand("weather", "Write an hourly weather fixture CSV for serve");
  weather->add_option("--start", wx_start, "First observation (ISO 8601)")->capture_default_str();
  weather->add_option("--hours", wx_hours, "Number of hourly observations")->capture_default_str();
  weather->add_option("--seed", wx_seed, "Seed")->capture_default_str();
  weather->add_option("--out", wx_out, "Fixture CSV")->required();

  // serve
  std::string srv_model, srv_store, srv_weather, srv_config, srv_host = "0.0.0.0", srv_at, srv_seed_csv;
  int srv_port = 8080;
  auto* serve = app.add_subcommand("serve", "Run the prediction HTTP service");
  serve->add_option("--model", srv_model, "Model bundle JSON")->required();
  serve->add_option("--store", srv_store, "Crash store directory")->required();
  serve->add_option("--weather", srv_weather, "Weather fixture CSV")->required();
  serve->add_option("--port", srv_port, "Port (0 picks a free one)")->capture_default_str();
  serve->add_option("--host", srv_host, "Bind address")->capture_default_str();
  serve->add_option("--config", srv_config, "Service config file");
  serve->add_option("--at", srv_at, "Freeze the service clock at this time (ISO 8601)");
  serve->add_option("--seed-records", srv_seed_csv, "Record CSV loaded into an empty store");

  // loadtest
  service::LoadProfile lt;
  std::string lt_report;
  auto* loadtest = app.add_subcommand("loadtest", "Closed-loop load test against a running service");
  loadtest->add_option("--url", lt.url, "Service base URL")->required();
  loadtest->add_option("--concurrency", lt.concurrency, "Concurrent clients")->capture_default_str();
  loadtest->add_option("--duration", lt.duration_s, "Seconds")->capture_default_str();
  loadtest->add_option("--zipf", lt.zipf, "Zipf exponent over cells")->capture_default_str();
  loadtest->add_option("--targets", lt.max_targets, "Active cells to target")->capture_default_str();
  loadtest->add_option("--seed", lt.seed, "Seed")->capture_default_str();
  loadtest->add_option("--what-if", lt.what_if_fraction, "Share of requests sent with a weather override")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  loadtest->add_option("--report", lt_report, "LatencyReport JSON (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*generate) {
      pipeline::SyntheticConfig cfg;
      cfg.n_records = gen_n;
      cfg.seed = gen_seed;
      const auto records = pipeline::generate_synthetic(cfg);
      write_records_csv(gen_out, records);
      std::cerr << "wrote " << records.size() << " records to " << gen_out << '\n';
    } else if (*validate) {
      const auto records = read_records(val_in);
      const auto thresholds = pipeline::fit_adaptive_thresholds(records, val_k, val_group);
      const auto result = pipeline::validate_batch(records, thresholds);
      write_json(val_report, to_json(result.report));
      if (!val_out.empty()) write_records_csv(val_out, result.retained);
    } else if (*impute) {
      const auto records = read_records(imp_in);
      if (imp_mask > 0.0) write_json(imp_report, to_json(pipeline::masked_imputation_eval(records, imp_mask, imp_seed)));
      const auto numeric = pipeline::impute_numeric_mice(records);
      write_records_csv(imp_out, pipeline::impute_categorical_conditional(numeric));
    } else if (*featcmd) {
      const auto records = read_records(feat_in);
      const auto ctx = features::FeatureContext::fit(records);
      write_labeled_csv(feat_out, featurize(ctx, records));
      if (!feat_context.empty()) write_json(feat_context, to_json(ctx));
    } else if (*resample) {
      const auto data = read_labeled_csv(res_in);
      const auto under = resampling::class_targets_from_json(read_json(res_under));
      const auto over = resampling::class_targets_from_json(read_json(res_over));
      const auto [balanced, report] = resampling::two_stage_balance(data, under, over, res_seed, res_k);
      write_labeled_csv(res_out, balanced);
      write_json(res_report, to_json(report));
    } else if (*train) {
      const auto records = read_records(train_in);
      TrainOptions options;
      options.seed = train_seed;
      if (train_balance) {
        options.under = resampling::reference_under_strategy();
        options.over = resampling::reference_over_strategy();
      }
      TrainReport report;
      save_bundle(train_out, train_bundle(records, options, &report));
      write_json(train_report, to_json(report));
    } else if (*tune) {
      const auto records = read_records(tune_train);
      const auto variant = parse_variant(tune_variant);
      const auto [train_idx, val_idx] = split_indices(records.size(), 0.2, tune_seed);
      std::vector<CrashRecord> train_part, val_part;
      for (auto i : train_idx) train_part.push_back(records[i]);
      for (auto i : val_idx) val_part.push_back(records[i]);
      const auto ctx = features::FeatureContext::fit(train_part);
      TrainOptions options;
      options.seed = tune_seed;
      auto& base = variant == boosting::BoosterVariant::kLeafwise ? options.leafwise : options.depthwise;
      const auto study = hyperopt::run_study(
          hyperopt::SearchSpace::reference(), tune_budget,
          hyperopt::booster_evaluator(featurize(ctx, train_part), featurize(ctx, val_part), base), tune_seed);
      write_json(tune_history, hyperopt::history_to_json(study));
      if (!study.best) throw Error(ErrorCode::kEvaluationFailure, "every trial failed");
      base = hyperopt::apply_params(base, study.best->params);
      save_bundle(tune_out, train_bundle(records, options));
      std::cerr << "best trial " << study.best->index << " scalar " << study.best->scalar << '\n';
    } else if (*evaluate) {
      const auto bundle = load_bundle(ev_model);
      const auto records = read_records(ev_data);
      evaluation::FoldSpec spec;
      spec.k = ev_folds;
      spec.mode = ev_mode == "geo" ? evaluation::FoldMode::kGeographic : evaluation::FoldMode::kRandom;
      const auto report = evaluation::cross_validate_records(records, spec, train_options_from(bundle), ev_seed);
      write_json(ev_report, to_json(report));
    } else if (*weather) {
      const auto start = parse_iso8601(wx_start);
      if (!start) throw Error(ErrorCode::kInvalidArgument, "bad --start " + wx_start);
      std::mt19937_64 rng(wx_seed);
      std::discrete_distribution<int> category({60, 10, 15, 8, 4, 3});
      std::normal_distribution<double> jitter(0.0, 1.0);
      std::vector<WeatherSnapshot> timeline;
      for (int h = 0; h < wx_hours; ++h) {
        auto w = nominal_weather(category(rng) + 1);
        w.temperature_c += 2.0 * jitter(rng);
        w.observed_at = *start + std::chrono::hours(h);
        timeline.push_back(w);
      }
      std::ofstream out(wx_out);
      if (!out) throw Error(ErrorCode::kUnreadableFile, "cannot write " + wx_out);
      service::write_weather_fixture(out, timeline);
    } else if (*serve) {
      service::ServiceConfig config;
      if (!srv_config.empty()) {
        config = service::ServiceConfig::load(srv_config);
        // Relative paths in the config file are relative to the file itself.
        const std::filesystem::path recs_path = config.recommendations_path;
        if (!recs_path.empty() && recs_path.is_relative()) {
          config.recommendations_path = (std::filesystem::path(srv_config).parent_path() / recs_path).string();
        }
      }
      auto recs = config.recommendations_path.empty() ? service::RecommendationTable::defaults()
                                                      : service::RecommendationTable::load(config.recommendations_path);
      std::filesystem::create_directories(srv_store);
      auto store = std::make_shared<service::CrashStore>(
          srv_store, service::CrashStoreOptions{service::CrashStoreOptions{}.max_records, config.store_index_resolution});
      if (!srv_seed_csv.empty() && store->size() == 0) store->insert(read_records(srv_seed_csv));
      std::shared_ptr<const service::Clock> clock;
      if (!srv_at.empty()) {
        const auto at = parse_iso8601(srv_at);
        if (!at) throw Error(ErrorCode::kInvalidArgument, "bad --at " + srv_at);
        clock = std::make_shared<service::ManualClock>(*at);
      } else {
        clock = std::make_shared<service::SystemClock>();
      }
      auto weather_source = std::make_shared<service::FixtureWeatherSource>(service::FixtureWeatherSource::load(srv_weather));
      auto model = std::make_shared<const ModelBundle>(load_bundle(srv_model));
      service::PredictionService svc(model, store, weather_source, clock, config, std::move(recs));
      try {
        const auto r = svc.refresh_primary();
        std::cerr << "primary cache: " << r.entries << " cells in " << r.seconds << " s\n";
      } catch (const Error& e) {
        std::cerr << "initial refresh failed: " << e.what() << '\n';
      }
      service::HttpApi api(svc);
      service::HttpServer server(api, config.server_threads);
      const int port = server.bind(srv_host, srv_port);
      std::signal(SIGINT, [](int) { g_stop = true; });
      std::signal(SIGTERM, [](int) { g_stop = true; });
      server.start();
      std::cout << "listening on " << srv_host << ':' << port << std::endl;
      while (!g_stop) {
        std::this_thread::sleep_for(std::chrono::milliseconds(200));
        try {
          svc.refresh_if_due();
        } catch (const Error& e) {
          std::cerr << "refresh failed: " << e.what() << '\n';
        }
      }
      server.stop();
    } else if (*loadtest) {
      write_json(lt_report, to_json(service::run_load_test(lt)));
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
