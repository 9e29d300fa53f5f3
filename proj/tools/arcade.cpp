// Command-line front end: preprocess captures, generate synthetic corpora,
// train, score, evaluate, run sweep experiments and benchmark throughput.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "arcade/bench.hpp"
#include "arcade/dataset.hpp"
#include "arcade/detector.hpp"
#include "arcade/errors.hpp"
#include "arcade/experiment.hpp"
#include "arcade/ingest.hpp"
#include "arcade/pca.hpp"
#include "arcade/synth.hpp"
#include "arcade/trainer.hpp"

namespace {

using json = nlohmann::json;

struct ScoreRow {
  double score;
  int label;  // -1 when unlabeled
};

std::vector<ScoreRow> read_scores_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw arcade::IoError("cannot open scores file: " + path);
  std::vector<ScoreRow> rows;
  std::string line;
  bool header = true;
  bool has_label = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (header) {
      has_label = line.find("label") != std::string::npos;
      header = false;
      continue;
    }
    std::istringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');  // index
    std::getline(ls, cell, ',');
    ScoreRow r{std::stod(cell), -1};
    if (has_label && std::getline(ls, cell, ',')) r.label = std::stoi(cell);
    rows.push_back(r);
  }
  return rows;
}

void write_scores_csv(const std::string& path, const std::vector<double>& scores,
                      const arcade::dataset::SampleSet& data) {
  std::ofstream os(path);
  if (!os) throw arcade::IoError("cannot open for writing: " + path);
  os.precision(17);
  os << (data.labeled ? "index,score,label\n" : "index,score\n");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    os << i << ',' << scores[i];
    if (data.labeled) os << ',' << int(data.labels[i]);
    os << '\n';
  }
}

int parse_epochs(const std::string& s, int& phase1, int& phase2) {
  const auto plus = s.find('+');
  try {
    if (plus == std::string::npos) {
      phase1 = std::stoi(s);
      phase2 = 0;
    } else {
      phase1 = std::stoi(s.substr(0, plus));
      phase2 = std::stoi(s.substr(plus + 1));
    }
  } catch (const std::exception&) {
    throw arcade::ConfigError("bad --epochs value '" + s + "' (expected E or E1+E2)");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ARCADE: unsupervised network anomaly detection on raw flow bytes"};
  app.require_subcommand(1);

  // ---- preprocess ----
  auto* pre = app.add_subcommand("preprocess", "pcap/pcapng -> sample file");
  std::string pre_in, pre_out, pre_mode = "flow";
  int pre_n = 2, pre_l = 100;
  double pre_timeout = 120.0;
  bool pre_pad = false;
  pre->add_option("--in", pre_in, "input capture (pcap or pcapng)")->required();
  pre->add_option("--out", pre_out, "output sample file")->required();
  pre->add_option("--n", pre_n, "packets per flow sample");
  pre->add_option("--l", pre_l, "bytes kept per packet");
  pre->add_option("--timeout", pre_timeout, "flow timeout in seconds");
  pre->add_option("--mode", pre_mode, "flow | session")
      ->check(CLI::IsMember({"flow", "session"}));
  pre->add_flag("--pad-incomplete", pre_pad,
                "emit zero-padded samples for flows shorter than n");

  // ---- synth ----
  auto* sy = app.add_subcommand("synth", "generate a labeled synthetic corpus");
  arcade::synth::SynthConfig sc;
  std::string sy_out;
  sy->add_option("--out", sy_out, "output sample file")->required();
  sy->add_option("--seed", sc.seed, "sampling seed");
  sy->add_option("--profile-seed", sc.profile_seed,
                 "traffic-profile (template family) seed; defaults to --seed");
  sy->add_option("--normal", sc.normal_flows, "normal flow count");
  sy->add_option("--anomaly", sc.anomaly_flows, "anomaly flow count");
  sy->add_option("--n", sc.n, "packets per flow");
  sy->add_option("--l", sc.l, "bytes per packet");
  sy->add_option("--templates", sc.template_count, "normal template count");
  sy->add_option("--jitter", sc.jitter, "per-byte jitter amplitude");
  sy->add_option("--flood-weight", sc.flood_weight,
                 "fraction of anomalies that are flood-style repeats");

  // ---- train ----
  auto* tr = app.add_subcommand("train", "train on normal traffic");
  std::string tr_data, tr_out, tr_epochs = "100+50", tr_d = "auto", tr_loss = "ssim";
  std::string tr_losses_csv, tr_resume, tr_save_state;
  arcade::train::TrainConfig tc;
  int tr_n = 0;
  tr->add_option("--data", tr_data, "training sample file (normal only)")->required();
  tr->add_option("--out", tr_out, "output checkpoint")->required();
  tr->add_option("--n", tr_n, "expected packets per sample (validated)");
  tr->add_option("--lambda-g", tc.lambda_g, "adversarial regularization coefficient");
  tr->add_option("--lambda-c", tc.lambda_c, "gradient penalty coefficient");
  tr->add_option("--seed", tc.seed, "training seed");
  tr->add_option("--epochs", tr_epochs, "schedule, e.g. 100+50");
  tr->add_option("--d", tr_d, "latent size: auto (PCA 95%) or an integer");
  tr->add_option("--batch", tc.batch_size, "batch size");
  tr->add_option("--loss", tr_loss, "reconstruction distance: ssim | l2")
      ->check(CLI::IsMember({"ssim", "l2"}));
  tr->add_option("--losses-csv", tr_losses_csv, "per-epoch loss history output");
  tr->add_option("--resume", tr_resume, "trainer state file to resume from");
  tr->add_option("--save-state", tr_save_state, "write resumable trainer state here");

  // ---- score ----
  auto* sco = app.add_subcommand("score", "anomaly scores for a sample file");
  std::string sco_ckpt, sco_data, sco_out;
  sco->add_option("--ckpt", sco_ckpt, "trained checkpoint")->required();
  sco->add_option("--data", sco_data, "sample file")->required();
  sco->add_option("--out", sco_out, "scores csv")->required();

  // ---- evaluate ----
  auto* ev = app.add_subcommand("evaluate", "threshold + metrics from scores");
  std::string ev_scores, ev_fit, ev_policy = "p99", ev_report;
  double ev_tau = 0.0;
  bool ev_tau_set = false;
  ev->add_option("--scores", ev_scores, "labeled scores csv")->required();
  ev->add_option("--fit-scores", ev_fit,
                 "normal scores csv used to fit the threshold (defaults to the "
                 "normal-labeled rows of --scores)");
  ev->add_option("--policy", ev_policy, "p99 | max | custom")
      ->check(CLI::IsMember({"p99", "max", "custom"}));
  ev->add_option("--tau", ev_tau, "threshold for --policy custom")
      ->each([&](const std::string&) { ev_tau_set = true; });
  ev->add_option("--report", ev_report, "metrics report json")->required();

  // ---- experiment ----
  auto* ex = app.add_subcommand("experiment", "run a sweep experiment");
  std::string ex_config, ex_out = "experiments";
  int ex_jobs = 0;
  ex->add_option("--config", ex_config, "experiment spec json")->required();
  ex->add_option("--out", ex_out, "output root directory");
  ex->add_option("--jobs", ex_jobs, "parallel runs (0 = auto)");

  // ---- bench ----
  auto* be = app.add_subcommand("bench", "detection-speed benchmark");
  std::string be_ckpt, be_data, be_out, be_batches = "1,32,256";
  double be_warmup = 1.0;
  int be_runs = 10;
  be->add_option("--ckpt", be_ckpt, "trained checkpoint")->required();
  be->add_option("--data", be_data, "sample file")->required();
  be->add_option("--batch-sizes", be_batches, "comma-separated batch sizes");
  be->add_option("--warmup", be_warmup, "warm-up seconds before timing");
  be->add_option("--runs", be_runs, "timed runs per batch size");
  be->add_option("--out", be_out, "optional csv output");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*pre) {
      arcade::ingest::IngestConfig cfg;
      cfg.n = pre_n;
      cfg.l = pre_l;
      cfg.timeout_s = pre_timeout;
      cfg.mode = pre_mode == "session" ? arcade::ingest::FlowMode::session
                                       : arcade::ingest::FlowMode::flow;
      cfg.pad_incomplete = pre_pad;
      auto res = arcade::ingest::preprocess_capture(pre_in, cfg);
      arcade::dataset::write_arcd(pre_out, res.samples);
      std::cout << "frames=" << res.counters.frames_total
                << " non_ip_skipped=" << res.counters.skipped_non_ip
                << " short_dropped=" << res.counters.dropped_short
                << " flows_emitted=" << res.flows.emitted
                << " flows_discarded=" << res.flows.discarded
                << " flows_padded=" << res.flows.padded << '\n';
      if (res.counters.truncated_tail)
        std::cerr << "warning: capture ended mid-record; trailing packet dropped\n";
      std::cout << "wrote " << res.samples.count() << " samples to " << pre_out << '\n';
    } else if (*sy) {
      auto set = arcade::synth::synth_generate(sc);
      arcade::dataset::write_arcd(sy_out, set);
      std::cout << "wrote " << set.count() << " samples (" << sc.normal_flows
                << " normal, " << sc.anomaly_flows << " anomaly) to " << sy_out << '\n';
    } else if (*tr) {
      parse_epochs(tr_epochs, tc.epochs_phase1, tc.epochs_phase2);
      tc.recon = tr_loss == "l2" ? arcade::train::ReconLoss::l2
                                 : arcade::train::ReconLoss::mssim;
      auto data = arcade::dataset::read_arcd(tr_data);
      if (tr_n > 0 && data.n != tr_n)
        throw arcade::ConfigError("--n=" + std::to_string(tr_n) +
                                  " but the sample file has n=" + std::to_string(data.n));
      std::unique_ptr<arcade::train::Trainer> trainer;
      if (!tr_resume.empty()) {
        trainer = std::make_unique<arcade::train::Trainer>(
            arcade::train::Trainer::load_state(tr_resume));
        std::cout << "resumed at epoch " << trainer->epoch() << '\n';
      } else {
        arcade::model::ModelConfig mc;
        mc.n = data.n;
        mc.l = data.l;
        mc.d = tr_d == "auto" ? arcade::train::latent_dim_from_pca(data.values)
                              : std::stoi(tr_d);
        std::cout << "latent size d=" << mc.d << (tr_d == "auto" ? " (PCA)" : "") << '\n';
        trainer = std::make_unique<arcade::train::Trainer>(
            arcade::model::build_model(mc, tc.seed), tc);
      }
      trainer->run(data, -1, [](const arcade::train::EpochStats& s,
                                const arcade::model::ModelHandles&) {
        std::cout << "epoch " << s.epoch << " lr=" << s.lr
                  << " critic_loss=" << s.critic_loss << " mssim=" << s.mssim << '\n';
      });
      arcade::model::save_checkpoint(tr_out, trainer->model(),
                                     {{"trained_epochs",
                                       std::to_string(trainer->epoch())}});
      if (!tr_losses_csv.empty())
        arcade::train::Trainer::write_losses_csv(tr_losses_csv, trainer->history());
      if (!tr_save_state.empty()) trainer->save_state(tr_save_state);
      std::cout << "wrote checkpoint " << tr_out << '\n';
    } else if (*sco) {
      auto ck = arcade::model::load_checkpoint(sco_ckpt);
      auto data = arcade::dataset::read_arcd(sco_data);
      if (data.w() != ck.model.cfg.w())
        throw arcade::ConfigError("sample length does not match checkpoint input size");
      auto scores = arcade::detect::anomaly_scores(ck.model, data.values);
      write_scores_csv(sco_out, scores, data);
      std::cout << "wrote " << scores.size() << " scores to " << sco_out << '\n';
    } else if (*ev) {
      auto rows = read_scores_csv(ev_scores);
      std::vector<double> scores;
      std::vector<std::uint8_t> labels;
      bool labeled = true;
      for (const auto& r : rows) {
        scores.push_back(r.score);
        if (r.label < 0) labeled = false;
        labels.push_back(r.label > 0 ? std::uint8_t(r.label) : 0);
      }
      const auto policy = arcade::detect::threshold_policy_from_string(ev_policy);
      double tau;
      if (policy == arcade::detect::ThresholdPolicy::custom) {
        if (!ev_tau_set)
          throw arcade::ConfigError("--policy custom requires --tau");
        tau = ev_tau;
      } else {
        std::vector<double> fit;
        if (!ev_fit.empty()) {
          for (const auto& r : read_scores_csv(ev_fit))
            if (r.label <= 0) fit.push_back(r.score);
        } else {
          if (!labeled)
            throw arcade::ConfigError(
                "scores file has no labels; provide --fit-scores with normal scores");
          for (const auto& r : rows)
            if (r.label == 0) fit.push_back(r.score);
        }
        tau = arcade::detect::fit_threshold(fit, policy);
      }
      if (!labeled)
        throw arcade::ConfigError("evaluate requires labeled scores");
      auto m = arcade::detect::evaluate(scores, labels, tau);
      json rep{{"policy", ev_policy},
               {"threshold", m.threshold},
               {"auroc", m.auroc ? json(*m.auroc) : json()},
               {"auroc_error", m.auroc_error},
               {"f1", m.f1},
               {"accuracy", m.accuracy},
               {"precision", m.precision},
               {"recall", m.recall},
               {"dr", m.dr},
               {"far", m.far},
               {"counts", {{"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn}}}};
      std::ofstream os(ev_report);
      if (!os) throw arcade::IoError("cannot open report for writing: " + ev_report);
      os << rep.dump(2) << '\n';
      std::cout << "threshold=" << m.threshold
                << " auroc=" << (m.auroc ? std::to_string(*m.auroc) : "undefined")
                << " f1=" << m.f1 << " dr=" << m.dr << " far=" << m.far << '\n';
    } else if (*ex) {
      auto spec = arcade::harness::ExperimentSpec::from_json_file(ex_config);
      auto res = arcade::harness::run_experiment(spec, ex_out, ex_jobs);
      std::size_t failed = 0;
      for (const auto& r : res.runs)
        if (!r.ok()) {
          ++failed;
          std::cerr << "run lambda_g=" << r.lambda_g << " n=" << r.n
                    << " seed=" << r.seed << " failed: " << r.error << '\n';
        }
      for (const auto& s : res.summary)
        std::cout << "lambda_g=" << s.lambda_g << " n=" << s.n << " auroc="
                  << s.auroc_mean << "+-" << s.auroc_std << " f1=" << s.f1_mean
                  << "+-" << s.f1_std << " (" << s.runs << " runs)\n";
      std::cout << "report: " << res.out_dir << '\n';
      if (failed) return 1;
    } else if (*be) {
      auto ck = arcade::model::load_checkpoint(be_ckpt);
      auto data = arcade::dataset::read_arcd(be_data);
      std::vector<int> batches;
      std::istringstream bs(be_batches);
      std::string cell;
      while (std::getline(bs, cell, ',')) batches.push_back(std::stoi(cell));
      auto rows = arcade::harness::bench_throughput(ck.model, data.values, batches,
                                                    be_warmup, be_runs);
      for (const auto& r : rows)
        std::cout << "batch=" << r.batch_size << " flows/s=" << r.mean_flows_per_s
                  << " +- " << r.std_flows_per_s << " (" << r.runs << " runs)\n";
      if (!be_out.empty()) arcade::harness::write_bench_csv(be_out, rows);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
