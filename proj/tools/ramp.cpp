// ramp: command-line front end for data generation, pre-training, online
// adaptation, ablations, the GPI check and plotting.

#include "ramp/ramp.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace {

namespace fs = std::filesystem;
using namespace ramp;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool print_config = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "JSON experiment config");
  app->add_option("--seed", c.seed, "Override the config seed");
  app->add_option("--out", c.out, "Output directory (overrides output_dir)");
  app->add_flag("--print-config", c.print_config, "Print the effective config and exit");
}

config::ExperimentConfig effective_config(const Common& c) {
  config::ExperimentConfig cfg = c.config_path.empty() ? config::ExperimentConfig{} : config::load(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  config::validate(cfg);
  return cfg;
}

std::string out_path(const config::ExperimentConfig& cfg, const std::string& name) {
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + cfg.output_dir + "': " + ec.message());
  return (fs::path(cfg.output_dir) / name).string();
}

int run(int argc, char** argv) {
  CLI::App app{"Random-feature Q-basis pre-training and model-predictive adaptation"};
  app.require_subcommand(1);

  Common gen_opts, pre_opts, adapt_opts, abl_opts;
  auto* gen = app.add_subcommand("gen-data", "Collect the reward-free offline dataset");
  add_common(gen, gen_opts);

  std::string dataset_path;
  auto* pre = app.add_subcommand("pretrain", "Train the Q-basis ensemble on a dataset");
  add_common(pre, pre_opts);
  pre->add_option("--dataset", dataset_path, "Dataset file (default <out>/dataset.rampds)");

  std::string checkpoint_path, adapt_dataset;
  auto* ad = app.add_subcommand("adapt", "Online adaptation to the configured task");
  add_common(ad, adapt_opts);
  ad->add_option("--checkpoint", checkpoint_path, "Checkpoint file (default <out>/checkpoint.rampck)");
  ad->add_option("--dataset", adapt_dataset, "Offline dataset, needed for regression.mode=offline_relabel");

  std::string axis;
  auto* abl = app.add_subcommand("ablate", "Sweep one axis over several seeds");
  add_common(abl, abl_opts);
  abl->add_option("which", axis, "features | dim | statedim | table1")->required();

  int trials = 200;
  std::uint64_t gpi_seed = 0;
  auto* gpi = app.add_subcommand("gpi-check", "Verify H-step policy improvement on random tabular MDPs");
  gpi->add_option("--trials", trials, "Number of random MDPs")->check(CLI::NonNegativeNumber);
  gpi->add_option("--seed", gpi_seed, "Seed");

  std::string csv_path, plot_out = ".";
  auto* plot = app.add_subcommand("plot", "Render one SVG line chart per metrics column");
  plot->add_option("csv", csv_path, "Metrics CSV")->required();
  plot->add_option("--out", plot_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  auto maybe_print = [](const Common& c, const config::ExperimentConfig& cfg) {
    if (!c.print_config) return false;
    std::cout << config::dump(cfg);
    return true;
  };

  if (gen->parsed()) {
    const auto cfg = effective_config(gen_opts);
    if (maybe_print(gen_opts, cfg)) return 0;
    const auto ds = pipeline::gen_data(cfg);
    envs::write_dataset(out_path(cfg, "dataset.rampds"), ds);
    std::cout << pipeline::coverage_summary(ds) << "\n";
  } else if (pre->parsed()) {
    const auto cfg = effective_config(pre_opts);
    if (maybe_print(pre_opts, cfg)) return 0;
    const auto ds = envs::read_dataset(dataset_path.empty() ? out_path(cfg, "dataset.rampds") : dataset_path, cfg.env);
    std::vector<qbasis::LossRecord> log;
    const auto ck = pipeline::pretrain(cfg, ds, &log);
    checkpoint::save(out_path(cfg, "checkpoint.rampck"), ck);
    io::write_file(out_path(cfg, "pretrain_loss.csv"), metrics::loss_csv(log));
    for (int e = 0; e < ck.ensemble.size(); ++e)
      std::cout << "member " << e << " loss " << metrics::fmt(ck.ensemble.initial_loss[static_cast<std::size_t>(e)])
                << " -> " << metrics::fmt(ck.ensemble.final_loss[static_cast<std::size_t>(e)]) << "\n";
  } else if (ad->parsed()) {
    const auto cfg = effective_config(adapt_opts);
    if (maybe_print(adapt_opts, cfg)) return 0;
    auto ck = checkpoint::load(checkpoint_path.empty() ? out_path(cfg, "checkpoint.rampck") : checkpoint_path);
    std::optional<envs::OfflineDataset> offline;
    if (!adapt_dataset.empty()) offline = envs::read_dataset(adapt_dataset, cfg.env);
    const auto res = pipeline::adapt(cfg, ck, offline ? &*offline : nullptr);
    io::write_file(out_path(cfg, "metrics.csv"), metrics::metrics_csv(res.rows));
    io::write_file(out_path(cfg, "eval.csv"), metrics::eval_csv(res.evals, res.random_returns));
    ck.weights = res.weights;
    ck.ensemble = res.ensemble;
    if (res.tail) ck.tail = res.tail;
    checkpoint::save(out_path(cfg, "adapted.rampck"), ck);
    double random_mean = 0.0;
    for (double r : res.random_returns) random_mean += r / static_cast<double>(std::max<std::size_t>(1, res.random_returns.size()));
    std::cout << "steps " << res.steps_taken << " episodes " << res.rows.size() << " final_eval_return "
              << metrics::fmt(res.final_eval_mean()) << " random_return " << metrics::fmt(random_mean) << "\n";
  } else if (abl->parsed()) {
    const auto cfg = effective_config(abl_opts);
    if (maybe_print(abl_opts, cfg)) return 0;
    const auto result = pipeline::ablate(cfg, axis);
    const std::string csv = pipeline::cells_csv(result.cells, result.metric);
    io::write_file(out_path(cfg, "ablate_" + axis + ".csv"), csv);
    std::cout << csv;
  } else if (gpi->parsed()) {
    oracle::GpiTrialsConfig gc;
    gc.trials = trials;
    gc.seed = gpi_seed;
    if (trials == 0) std::cerr << "warning: zero trials, the check holds vacuously\n";
    const auto rep = oracle::gpi_trials(gc);
    const double gap = rep.trials > 0 ? rep.worst_gap() : 0.0;
    std::cout << "{\"holds\":" << (rep.holds ? "true" : "false") << ",\"worst_gap\":" << metrics::fmt(gap)
              << ",\"trials\":" << rep.trials << ",\"violations\":" << rep.violations << "}\n";
    return rep.holds ? 0 : 1;
  } else if (plot->parsed()) {
    std::error_code ec;
    fs::create_directories(plot_out, ec);
    if (ec) throw IoError("cannot create output directory '" + plot_out + "'");
    const auto stem = fs::path(csv_path).stem().string();
    for (const auto& [name, svg] : metrics::plot_csv(io::read_file(csv_path))) {
      const auto path = (fs::path(plot_out) / (stem + "_" + name + ".svg")).string();
      io::write_file(path, svg);
      std::cout << path << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ramp::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ramp::RankDeficiency& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ramp::NumericFailure& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const ramp::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 4;
  } catch (const ramp::ResourceError& e) {
    std::cerr << "resource error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
