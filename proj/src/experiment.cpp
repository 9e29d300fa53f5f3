#include "arcade/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <thread>

#include <nlohmann/json.hpp>

#include "arcade/errors.hpp"
#include "arcade/pca.hpp"
#include "arcade/svg_plot.hpp"

namespace arcade::harness {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

void ExperimentSpec::validate() const {
  if (seeds.empty()) throw ConfigError("experiment: at least one seed required");
  if (lambda_g_values.empty() || n_values.empty())
    throw ConfigError("experiment: sweep axes must be non-empty");
  for (double lg : lambda_g_values)
    if (lg < 0) throw ConfigError("experiment: lambda_g must be >= 0");
  for (int n : n_values)
    if (n < 1) throw ConfigError("experiment: n must be >= 1");
  if (train_normal_flows < 1 || test_normal_flows < 1 || test_anomaly_flows < 1)
    throw ConfigError("experiment: flow counts must be positive");
  if (eval_every < 1) throw ConfigError("experiment: eval_every must be >= 1");
  if (latent_dim < 0) throw ConfigError("experiment: latent_dim must be >= 0");
  train_base.validate();
}

std::string ExperimentSpec::canonical_json() const {
  json j{{"name", name},
         {"seeds", seeds},
         {"lambda_g_values", lambda_g_values},
         {"n_values", n_values},
         {"train_normal_flows", train_normal_flows},
         {"test_normal_flows", test_normal_flows},
         {"test_anomaly_flows", test_anomaly_flows},
         {"synth",
          {{"template_count", synth_base.template_count},
           {"jitter", synth_base.jitter},
           {"flood_weight", synth_base.flood_weight},
           {"l", synth_base.l}}},
         {"train",
          {{"batch_size", train_base.batch_size},
           {"lambda_c", train_base.lambda_c},
           {"lr_phase1", train_base.lr_phase1},
           {"lr_phase2", train_base.lr_phase2},
           {"epochs_phase1", train_base.epochs_phase1},
           {"epochs_phase2", train_base.epochs_phase2},
           {"beta1", train_base.beta1},
           {"beta2", train_base.beta2},
           {"recon", train_base.recon == train::ReconLoss::mssim ? "mssim" : "l2"}}},
         {"latent_dim", latent_dim},
         {"policy", detect::to_string(policy)},
         {"eval_every", eval_every}};
  return j.dump();
}

std::string ExperimentSpec::hash() const {
  // FNV-1a 64 over the canonical form.
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : canonical_json()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf, 16);
}

ExperimentSpec ExperimentSpec::from_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open experiment config: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::parse_error& e) {
    throw ParseError("experiment config: " + std::string(e.what()));
  }

  static const std::vector<std::string> known{
      "name", "seeds", "lambda_g_values", "n_values", "train_normal_flows",
      "test_normal_flows", "test_anomaly_flows", "synth", "train",
      "latent_dim", "policy", "eval_every"};
  for (auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ParseError("experiment config: unknown key '" + key + "'");

  ExperimentSpec s;
  if (j.contains("name")) s.name = j.at("name").get<std::string>();
  if (j.contains("seeds")) s.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("lambda_g_values"))
    s.lambda_g_values = j.at("lambda_g_values").get<std::vector<double>>();
  if (j.contains("n_values")) s.n_values = j.at("n_values").get<std::vector<int>>();
  if (j.contains("train_normal_flows"))
    s.train_normal_flows = j.at("train_normal_flows").get<std::int64_t>();
  if (j.contains("test_normal_flows"))
    s.test_normal_flows = j.at("test_normal_flows").get<std::int64_t>();
  if (j.contains("test_anomaly_flows"))
    s.test_anomaly_flows = j.at("test_anomaly_flows").get<std::int64_t>();
  if (j.contains("synth")) {
    const auto& sy = j.at("synth");
    if (sy.contains("template_count"))
      s.synth_base.template_count = sy.at("template_count").get<int>();
    if (sy.contains("jitter")) s.synth_base.jitter = sy.at("jitter").get<int>();
    if (sy.contains("flood_weight"))
      s.synth_base.flood_weight = sy.at("flood_weight").get<double>();
    if (sy.contains("l")) s.synth_base.l = sy.at("l").get<int>();
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    if (t.contains("batch_size")) s.train_base.batch_size = t.at("batch_size").get<int>();
    if (t.contains("lambda_c")) s.train_base.lambda_c = t.at("lambda_c").get<double>();
    if (t.contains("lr_phase1")) s.train_base.lr_phase1 = t.at("lr_phase1").get<double>();
    if (t.contains("lr_phase2")) s.train_base.lr_phase2 = t.at("lr_phase2").get<double>();
    if (t.contains("epochs_phase1"))
      s.train_base.epochs_phase1 = t.at("epochs_phase1").get<int>();
    if (t.contains("epochs_phase2"))
      s.train_base.epochs_phase2 = t.at("epochs_phase2").get<int>();
    if (t.contains("recon"))
      s.train_base.recon = t.at("recon").get<std::string>() == "l2"
                               ? train::ReconLoss::l2
                               : train::ReconLoss::mssim;
  }
  if (j.contains("latent_dim")) s.latent_dim = j.at("latent_dim").get<int>();
  if (j.contains("policy"))
    s.policy = detect::threshold_policy_from_string(j.at("policy").get<std::string>());
  if (j.contains("eval_every")) s.eval_every = j.at("eval_every").get<int>();
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------

namespace {

struct PointData {
  dataset::SampleSet train;
  dataset::SampleSet test;
  int d = 0;
};

struct Task {
  double lambda_g;
  int n;
  std::uint64_t seed;
  std::size_t data_key;
  std::size_t out_index;
};

std::uint64_t mix_seed(std::uint64_t seed, int n, int stream) {
  return seed * 1000003ULL + static_cast<std::uint64_t>(n) * 101ULL +
         static_cast<std::uint64_t>(stream);
}

RunOutcome execute_run(const ExperimentSpec& spec, const Task& task,
                       const PointData& data, const fs::path& run_dir) {
  RunOutcome out;
  out.lambda_g = task.lambda_g;
  out.n = task.n;
  out.seed = task.seed;
  out.latent_dim = data.d;

  model::ModelConfig mc;
  mc.n = task.n;
  mc.l = spec.synth_base.l;
  mc.d = data.d;
  auto handles = model::build_model(mc, task.seed);

  train::TrainConfig tc = spec.train_base;
  tc.lambda_g = task.lambda_g;
  tc.seed = task.seed;

  std::vector<int> curve_epochs;
  std::vector<double> curve_auroc;
  auto cb = [&](const train::EpochStats& st, const model::ModelHandles& m) {
    if ((st.epoch + 1) % spec.eval_every != 0 && st.epoch + 1 != tc.total_epochs())
      return;
    auto scores = detect::anomaly_scores(m, data.test.values);
    curve_epochs.push_back(st.epoch);
    curve_auroc.push_back(detect::auroc(scores, data.test.labels));
  };

  train::Trainer trainer(std::move(handles), tc);
  trainer.run(data.train, -1, cb);

  fs::create_directories(run_dir);
  model::save_checkpoint((run_dir / "checkpoint.arck").string(), trainer.model(),
                         {{"experiment", spec.name}});
  train::Trainer::write_losses_csv((run_dir / "losses.csv").string(),
                                   trainer.history());

  auto train_scores = detect::anomaly_scores(trainer.model(), data.train.values);
  auto test_scores = detect::anomaly_scores(trainer.model(), data.test.values);
  const double tau = detect::fit_threshold(train_scores, spec.policy);
  out.metrics = detect::evaluate(test_scores, data.test.labels, tau);
  out.curve_epochs = std::move(curve_epochs);
  out.curve_auroc = std::move(curve_auroc);

  std::ofstream scsv(run_dir / "scores.csv");
  scsv << "index,score,label\n";
  scsv.precision(17);
  for (std::size_t i = 0; i < test_scores.size(); ++i)
    scsv << i << ',' << test_scores[i] << ',' << int(data.test.labels[i]) << '\n';

  json rep{{"lambda_g", out.lambda_g},
           {"n", out.n},
           {"seed", out.seed},
           {"latent_dim", out.latent_dim},
           {"threshold", out.metrics.threshold},
           {"policy", detect::to_string(spec.policy)},
           {"auroc", out.metrics.auroc ? json(*out.metrics.auroc) : json()},
           {"f1", out.metrics.f1},
           {"accuracy", out.metrics.accuracy},
           {"precision", out.metrics.precision},
           {"recall", out.metrics.recall},
           {"dr", out.metrics.dr},
           {"far", out.metrics.far},
           {"counts",
            {{"tp", out.metrics.tp}, {"fp", out.metrics.fp},
             {"tn", out.metrics.tn}, {"fn", out.metrics.fn}}}};
  std::ofstream rj(run_dir / "report.json");
  rj << rep.dump(2) << '\n';
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec,
                                const std::string& out_root, int jobs) {
  spec.validate();
  ExperimentResult result;
  const fs::path out_dir = fs::path(out_root) / spec.hash();
  result.out_dir = out_dir.string();
  fs::create_directories(out_dir / "runs");
  fs::create_directories(out_dir / "plots");
  {
    std::ofstream cfg(out_dir / "config.json");
    cfg << spec.canonical_json() << '\n';
  }

  // Data (and the PCA latent size) depend on (n, seed) only, so every
  // lambda_g point compares against the same corpus and initialization.
  std::vector<PointData> data_cache;
  std::map<std::pair<int, std::uint64_t>, std::size_t> data_index;
  for (int n : spec.n_values)
    for (auto seed : spec.seeds) {
      // One traffic profile per (n, seed); train and held-out sets draw
      // fresh flows from the same template family.
      synth::SynthConfig train_cfg = spec.synth_base;
      train_cfg.n = n;
      train_cfg.normal_flows = spec.train_normal_flows;
      train_cfg.anomaly_flows = 0;
      train_cfg.profile_seed = mix_seed(seed, n, 7);
      train_cfg.seed = mix_seed(seed, n, 1);
      synth::SynthConfig test_cfg = spec.synth_base;
      test_cfg.n = n;
      test_cfg.normal_flows = spec.test_normal_flows;
      test_cfg.anomaly_flows = spec.test_anomaly_flows;
      test_cfg.profile_seed = train_cfg.profile_seed;
      test_cfg.seed = mix_seed(seed, n, 2);

      PointData pd;
      pd.train = synth::synth_generate(train_cfg);
      pd.test = synth::synth_generate(test_cfg);
      pd.d = spec.latent_dim > 0 ? spec.latent_dim
                                 : train::latent_dim_from_pca(pd.train.values);
      data_index[{n, seed}] = data_cache.size();
      data_cache.push_back(std::move(pd));
    }

  std::vector<Task> tasks;
  for (double lg : spec.lambda_g_values)
    for (int n : spec.n_values)
      for (auto seed : spec.seeds)
        tasks.push_back({lg, n, seed, data_index[{n, seed}], tasks.size()});
  result.runs.resize(tasks.size());

  if (jobs <= 0)
    jobs = static_cast<int>(std::min<std::size_t>(
        tasks.size(), std::max(1u, std::thread::hardware_concurrency())));

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const Task& t = tasks[i];
      const fs::path run_dir = out_dir / "runs" /
                               ("lg" + fmt_short(t.lambda_g) + "_n" + std::to_string(t.n)) /
                               ("seed" + std::to_string(t.seed));
      RunOutcome out;
      try {
        out = execute_run(spec, t, data_cache[t.data_key], run_dir);
      } catch (const std::exception& e) {
        out.lambda_g = t.lambda_g;
        out.n = t.n;
        out.seed = t.seed;
        out.error = e.what();
      }
      result.runs[t.out_index] = std::move(out);
    }
  };
  std::vector<std::thread> pool;
  for (int i = 0; i < jobs; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  // Summary rows per (lambda_g, n) over successful runs.
  for (double lg : spec.lambda_g_values)
    for (int n : spec.n_values) {
      SummaryRow row;
      row.lambda_g = lg;
      row.n = n;
      std::vector<double> au, f1;
      for (const auto& r : result.runs)
        if (r.ok() && r.lambda_g == lg && r.n == n && r.metrics.auroc) {
          au.push_back(*r.metrics.auroc);
          f1.push_back(r.metrics.f1);
        }
      row.runs = static_cast<int>(au.size());
      row.auroc_mean = mean_of(au);
      row.auroc_std = std_of(au);
      row.f1_mean = mean_of(f1);
      row.f1_std = std_of(f1);
      result.summary.push_back(row);
    }

  // results.csv
  {
    std::ofstream os(out_dir / "results.csv");
    os << "lambda_g,n,seed,d,auroc,f1,accuracy,precision,recall,dr,far,threshold,error\n";
    for (const auto& r : result.runs) {
      os << fmt_short(r.lambda_g) << ',' << r.n << ',' << r.seed << ',' << r.latent_dim << ',';
      if (r.ok()) {
        os << (r.metrics.auroc ? fmt(*r.metrics.auroc) : "") << ',' << fmt(r.metrics.f1)
           << ',' << fmt(r.metrics.accuracy) << ',' << fmt(r.metrics.precision) << ','
           << fmt(r.metrics.recall) << ',' << fmt(r.metrics.dr) << ',' << fmt(r.metrics.far)
           << ',' << fmt(r.metrics.threshold) << ',';
      } else {
        os << ",,,,,,,," << r.error;
      }
      os << '\n';
    }
  }
  // summary.csv
  {
    std::ofstream os(out_dir / "summary.csv");
    os << "lambda_g,n,runs,auroc_mean,auroc_std,f1_mean,f1_std\n";
    for (const auto& s : result.summary)
      os << fmt_short(s.lambda_g) << ',' << s.n << ',' << s.runs << ','
         << fmt(s.auroc_mean) << ',' << fmt(s.auroc_std) << ',' << fmt(s.f1_mean)
         << ',' << fmt(s.f1_std) << '\n';
  }
  // curves.csv
  {
    std::ofstream os(out_dir / "curves.csv");
    os << "lambda_g,n,seed,epoch,auroc\n";
    for (const auto& r : result.runs)
      for (std::size_t i = 0; i < r.curve_epochs.size(); ++i)
        os << fmt_short(r.lambda_g) << ',' << r.n << ',' << r.seed << ','
           << r.curve_epochs[i] << ',' << fmt(r.curve_auroc[i]) << '\n';
  }

  // Plots: AUROC convergence per sweep point (mean over seeds), and AUROC
  // versus input size when n is swept.
  {
    std::vector<PlotSeries> series;
    for (double lg : spec.lambda_g_values)
      for (int n : spec.n_values) {
        std::map<int, std::vector<double>> per_epoch;
        for (const auto& r : result.runs)
          if (r.ok() && r.lambda_g == lg && r.n == n)
            for (std::size_t i = 0; i < r.curve_epochs.size(); ++i)
              per_epoch[r.curve_epochs[i]].push_back(r.curve_auroc[i]);
        if (per_epoch.empty()) continue;
        PlotSeries s;
        s.label = "lambda_g=" + fmt_short(lg) + " n=" + std::to_string(n);
        for (const auto& [e, v] : per_epoch) {
          s.x.push_back(e);
          s.y.push_back(mean_of(v));
        }
        series.push_back(std::move(s));
      }
    write_svg_lines((out_dir / "plots" / "auroc_vs_epoch.svg").string(),
                    "Mean test AUROC convergence", "epoch", "AUROC", series);
  }
  if (spec.n_values.size() > 1) {
    std::vector<PlotSeries> series;
    for (double lg : spec.lambda_g_values) {
      PlotSeries s;
      s.label = "lambda_g=" + fmt_short(lg);
      for (const auto& row : result.summary)
        if (row.lambda_g == lg) {
          s.x.push_back(row.n);
          s.y.push_back(row.auroc_mean);
        }
      series.push_back(std::move(s));
    }
    write_svg_lines((out_dir / "plots" / "auroc_vs_n.svg").string(),
                    "Mean AUROC by input size", "packets per flow (n)", "AUROC",
                    series);
  }

  // report.json
  {
    json runs = json::array();
    for (const auto& r : result.runs) {
      json jr{{"lambda_g", r.lambda_g}, {"n", r.n}, {"seed", r.seed}};
      if (r.ok()) {
        jr["latent_dim"] = r.latent_dim;
        jr["auroc"] = r.metrics.auroc ? json(*r.metrics.auroc) : json();
        jr["f1"] = r.metrics.f1;
        jr["dr"] = r.metrics.dr;
        jr["far"] = r.metrics.far;
        jr["threshold"] = r.metrics.threshold;
      } else {
        jr["error"] = r.error;
      }
      runs.push_back(jr);
    }
    json summary = json::array();
    for (const auto& s : result.summary)
      summary.push_back({{"lambda_g", s.lambda_g},
                         {"n", s.n},
                         {"runs", s.runs},
                         {"auroc_mean", s.auroc_mean},
                         {"auroc_std", s.auroc_std},
                         {"f1_mean", s.f1_mean},
                         {"f1_std", s.f1_std}});
    json rep{{"name", spec.name},
             {"hash", spec.hash()},
             {"runs", runs},
             {"summary", summary}};
    std::ofstream os(out_dir / "report.json");
    os << rep.dump(2) << '\n';
  }

  return result;
}

}  // namespace arcade::harness
