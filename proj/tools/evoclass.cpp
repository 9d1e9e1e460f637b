#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "evoclass/app/pipeline.hpp"
#include "evoclass/registry/transport.hpp"

using namespace evoclass;
namespace fs = std::filesystem;

namespace {

struct HostPort {
  std::string host;
  int port = 0;
};

HostPort parse_url(const std::string& url) {
  std::string rest = url;
  if (auto p = rest.find("://"); p != std::string::npos) rest = rest.substr(p + 3);
  const auto colon = rest.rfind(':');
  if (colon == std::string::npos) throw std::invalid_argument("expected host:port, got '" + url + "'");
  return {rest.substr(0, colon), std::stoi(rest.substr(colon + 1))};
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::string timer(std::chrono::steady_clock::time_point start) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1fs",
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  return buf;
}

app::PreparedData load_prepared(const app::AppConfig& cfg) {
  auto schema = features::FeatureSchema::load(cfg.paths.featureSchema);
  std::ifstream in(cfg.paths.dataset);
  if (!in) throw std::runtime_error("cannot read dataset " + cfg.paths.dataset.string() + " (run `prepare` first)");
  auto matrix = features::read_dataset_csv(in, schema);
  return {std::move(matrix), std::move(schema), {}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Predict-before-execute filtering for a rule-based registry API"};
  cli.require_subcommand(1);
  std::string configPath = "config/default.json";
  cli.add_option("-c,--config", configPath, "Configuration file")->check(CLI::ExistingFile);

  auto* catalogCmd = cli.add_subcommand("catalog", "Write the rule catalog (rule sets and change log)");

  auto* serve = cli.add_subcommand("serve", "Run the registry over HTTP");
  std::string serveVersion = "v1", serveEnv = "dev", serveHost;
  int servePort = 0;
  serve->add_option("--version", serveVersion, "Rule-set version (v1..v10)");
  serve->add_option("--env", serveEnv, "dev|test|prod");
  serve->add_option("--host", serveHost, "Bind address (default from config)");
  serve->add_option("--port", servePort, "Port (default from config)");

  auto* collect = cli.add_subcommand("collect", "Generate and execute requests, writing the raw log");
  std::string collectUrl;
  std::size_t collectBudget = 0;
  collect->add_option("--url", collectUrl, "Send to a running `serve` instance instead of an in-process registry");
  collect->add_option("--budget", collectBudget, "Override the request budget");

  auto* prepareCmd = cli.add_subcommand("prepare", "Refine the raw log into a dataset and feature schema");

  auto* train = cli.add_subcommand("train", "Train the random forest");
  int searchTrials = 0;
  train->add_option("--search", searchTrials, "Run a random hyperparameter search with this many trials");

  auto* evalModel = cli.add_subcommand("eval-model", "Compare the forest with the baseline classifiers");

  auto* campaign = cli.add_subcommand("campaign", "Run one generation campaign, optionally gated");
  std::string filter = "on", campVersion = "v1", campEnv = "dev";
  std::size_t campBudget = 0;
  std::uint64_t campSeed = 0;
  bool noShadow = false;
  campaign->add_option("--filter", filter, "on|off")->check(CLI::IsMember({"on", "off"}));
  campaign->add_option("--version", campVersion, "Rule-set version");
  campaign->add_option("--env", campEnv, "dev|test|prod");
  campaign->add_option("--budget", campBudget, "Requests to generate (default from config)");
  campaign->add_option("--seed", campSeed, "Generator seed (default from config)");
  campaign->add_flag("--no-shadow", noShadow, "Do not measure false negatives against a shadow registry");

  auto* experimentCmd = cli.add_subcommand("experiment", "Run the factorial experiment from the config");
  int reps = 0;
  std::size_t expBudget = 0;
  experimentCmd->add_option("--repetitions", reps, "Override repetitions per cell");
  experimentCmd->add_option("--budget", expBudget, "Override the per-run budget");

  auto* report = cli.add_subcommand("report", "Render CSV reports from the experiment results");

  CLI11_PARSE(cli, argc, argv);

  try {
    auto cfg = app::load_config(configPath);
    const auto start = std::chrono::steady_clock::now();

    if (*catalogCmd) {
      const auto catalog = rules::generate_catalog(cfg.catalogSeed);
      rules::write_catalog(catalog, cfg.paths.catalogDir);
      std::cout << "wrote " << catalog.sets.size() << " rule sets and " << catalog.deltas.size() << " changes to "
                << cfg.paths.catalogDir << '\n';
    } else if (*serve) {
      const auto catalog = rules::generate_catalog(cfg.catalogSeed);
      const auto env = rules::parse_environment(serveEnv);
      app::LocalRegistry reg(catalog, serveVersion, env, cfg.authToken);
      registry::HttpServer server(*reg.service);
      const auto host = serveHost.empty() ? cfg.serverHost : serveHost;
      const int port = servePort ? servePort : cfg.serverPort;
      std::cout << "serving " << serveVersion << '/' << serveEnv << " on http://" << host << ':' << port << std::endl;
      server.listen(host, port);
    } else if (*collect) {
      if (collectBudget) cfg.generator.budget = collectBudget;
      const auto catalog = rules::generate_catalog(cfg.catalogSeed);
      app::LocalRegistry reg(catalog, cfg.collectVersion, cfg.collectEnvironment, cfg.authToken);
      std::unique_ptr<registry::HttpTransport> http;
      registry::Transport* transport = reg.transport.get();
      if (!collectUrl.empty()) {
        const auto hp = parse_url(collectUrl);
        http = std::make_unique<registry::HttpTransport>(hp.host, hp.port);
        transport = http.get();
      }
      ensure_parent(cfg.paths.rawLog);
      fs::remove(cfg.paths.rawLog);
      const generator::RequestGenerator gen(generator::default_schema(), cfg.generator);
      const auto summary = generator::run_collection(
          gen, *transport, cfg.paths.rawLog,
          app::context(cfg, cfg.collectVersion, cfg.collectEnvironment, "collect"));
      std::cout << "wrote " << summary.records << " records to " << cfg.paths.rawLog << " (" << timer(start) << ")\n";
      for (const auto& [status, n] : summary.statusCounts) {
        std::printf("  %d: %zu (%.2f%%)\n", status, n, 100.0 * static_cast<double>(n) / static_cast<double>(summary.records));
      }
    } else if (*prepareCmd) {
      const auto refined = features::refine_file(cfg.paths.rawLog);
      if (refined.skipped) std::cerr << "skipped " << refined.skipped << " malformed lines\n";
      const auto data = app::prepare(refined.records, cfg);
      ensure_parent(cfg.paths.dataset);
      std::ofstream out(cfg.paths.dataset);
      features::write_dataset_csv(data.matrix, data.schema, out);
      data.schema.save(cfg.paths.featureSchema);
      std::cout << "dataset: " << data.matrix.rows() << " rows x " << data.matrix.cols << " features\n";
      for (const auto& n : data.dropped) std::cout << "  dropped (zero importance): " << n << '\n';
    } else if (*train) {
      const auto data = load_prepared(cfg);
      const auto parts = app::split(data, cfg);
      auto hp = cfg.hyperparams;
      if (searchTrials > 0) {
        const auto result = classifier::hyperparameter_search(parts.train, cfg.searchSpace, searchTrials, cfg.searchSeed);
        hp = result.best;
        std::cout << "search: best validation accuracy " << result.bestAccuracy << '\n';
      }
      const auto model = app::train_model(parts.train, data.schema, hp, cfg);
      ensure_parent(cfg.paths.model);
      model.save(cfg.paths.model);
      std::cout << "hyperparams " << classifier::to_json_value(hp).dump() << '\n';
      const auto imp = model.feature_importances();
      for (std::size_t j = 0; j < imp.size(); ++j) std::printf("  %-40s %.4f\n", data.schema.features[j].name.c_str(), imp[j]);
      std::cout << "model written to " << cfg.paths.model << " (" << timer(start) << ")\n";
    } else if (*evalModel) {
      const auto data = load_prepared(cfg);
      const auto parts = app::split(data, cfg);
      const auto model = classifier::ForestModel::load(cfg.paths.model);
      model.check_schema(data.schema);
      const auto rows = app::compare_models(model, parts);
      fs::create_directories(cfg.paths.reports);
      std::ofstream cmp(cfg.paths.reports / "model_comparison.csv");
      experiment::write_model_comparison_csv(rows, cmp);
      std::ofstream roc(cfg.paths.reports / "roc.csv");
      experiment::write_roc_csv(rows, roc);
      experiment::write_model_comparison_csv(rows, std::cout);
    } else if (*campaign) {
      const auto catalog = rules::generate_catalog(cfg.catalogSeed);
      app::CampaignOptions opt;
      opt.filter = filter == "on";
      opt.version = campVersion;
      opt.environment = rules::parse_environment(campEnv);
      opt.budget = campBudget ? campBudget : cfg.campaignBudget;
      opt.seed = campSeed ? campSeed : cfg.campaignSeed;
      opt.shadow = !noShadow;
      std::optional<classifier::ForestModel> model;
      std::optional<features::FeatureSchema> schema;
      if (opt.filter) {
        model = classifier::ForestModel::load(cfg.paths.model);
        schema = features::FeatureSchema::load(cfg.paths.featureSchema);
      }
      const auto result = app::run_campaign(cfg, catalog, model ? &*model : nullptr, schema ? &*schema : nullptr, opt);
      fs::create_directories(cfg.paths.campaignDir);
      const std::string stem = campEnv + "_" + campVersion + "_" + filter;
      std::ofstream log(cfg.paths.campaignDir / (stem + "_executed.jsonl"));
      for (const auto& r : result.executed) log << nlohmann::json(r).dump() << '\n';
      std::ofstream audit(cfg.paths.campaignDir / (stem + "_filtered.csv"));
      audit << "index,probability,shadow_status\n";
      for (const auto& f : result.filtered) {
        audit << f.index << ',' << f.probability << ',' << (f.shadowStatus ? std::to_string(*f.shadowStatus) : "")
              << '\n';
      }
      std::cout << gate::kFilterStatsCsvHeader << '\n'
                << gate::filter_stats_csv_row(campEnv, campVersion, result.stats) << '\n';
      if (result.stats.filteredButSuccessful) {
        std::cout << "false negatives (shadow): " << *result.stats.filteredButSuccessful << '\n';
      }
    } else if (*experimentCmd) {
      if (reps) cfg.experiment.repetitions = reps;
      if (expBudget) cfg.experiment.budget = expBudget;
      const auto catalog = rules::generate_catalog(cfg.catalogSeed);
      const auto model = classifier::ForestModel::load(cfg.paths.model);
      const auto schema = features::FeatureSchema::load(cfg.paths.featureSchema);
      const auto store = experiment::run_experiment(cfg.experiment, catalog, {&model, &schema}, &std::cerr);
      store.save(cfg.paths.results);
      std::cout << "wrote " << store.rows.size() << " runs to " << cfg.paths.results << " (" << timer(start) << ")\n";
    } else if (*report) {
      const auto store = experiment::ResultStore::load(cfg.paths.results);
      const auto paths = experiment::render_reports(store, cfg.paths.reports);
      std::cout << "wrote " << paths.costReduction << ", " << paths.ruleHits << ", " << paths.statistics << ", "
                << paths.correlation << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
