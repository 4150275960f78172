#include "cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "hypersage/checks.hpp"
#include "hypersage/datasets.hpp"
#include "hypersage/error.hpp"
#include "hypersage/model.hpp"
#include "hypersage/train_eval.hpp"

namespace hypersage::cli {

namespace fs = std::filesystem;

namespace {

// Raised when a check ran to completion but did not meet its tolerance.
class CheckFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::optional<std::size_t> parse_alpha(const std::string& text) {
  if (text == "max") return std::nullopt;
  std::size_t v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || end != text.data() + text.size() || v == 0) {
    throw InvalidArgument("--alpha expects 'max' or a positive integer, got '" + text + "'");
  }
  return v;
}

const auto kAlphaValidator = CLI::Validator(
    [](std::string& s) {
      try {
        parse_alpha(s);
        return std::string{};
      } catch (const InvalidArgument& e) {
        return std::string(e.what());
      }
    },
    "max|INT", "alpha");

// Flags shared by every command that trains models.
struct TrainFlags {
  std::string data;
  std::string out = "runs";
  TrainConfig cfg;
  std::string semantics = "eq4";
  bool full_protocol = false;

  void add_to(CLI::App& cmd, bool repeats) {
    cmd.add_option("--data", data, "Dataset directory")->required()->type_name("DIR");
    cmd.add_option("--out", out, "Directory for run logs and checkpoints")->type_name("DIR");
    cmd.add_option("--seed", cfg.master_seed, "Master seed for splits and initializations");
    cmd.add_option("--jobs", cfg.jobs, "Independent runs executed concurrently")->check(CLI::PositiveNumber);
    cmd.add_option("--hidden", cfg.hidden, "Hidden layer width")->check(CLI::PositiveNumber);
    cmd.add_option("--dropout", cfg.dropout, "Dropout rate")->check(CLI::Range(0.0, 1.0));
    cmd.add_option("--lr", cfg.lr, "Adam learning rate")->check(CLI::PositiveNumber);
    cmd.add_option("--weight-decay", cfg.weight_decay, "L2 penalty coupled into the gradient")
        ->check(CLI::NonNegativeNumber);
    cmd.add_option("--epochs", cfg.epochs, "Training epochs");
    cmd.add_option("--train-fraction", cfg.train_fraction, "Labelled fraction per class")
        ->check(CLI::Range(0.0, 1.0));
    cmd.add_option("--aggregation-semantics", semantics, "Residual update form")
        ->check(CLI::IsMember({"eq4", "alg1-per-edge"}));
    cmd.add_flag("--edge-count-prefactor", cfg.aggregator.edge_count_prefactor,
                 "Scale the inter-edge sum by 1/|E(v)|");
    if (repeats) {
      cmd.add_option("--splits", cfg.num_splits, "Data splits per protocol")->check(CLI::PositiveNumber);
      cmd.add_option("--seeds", cfg.num_seeds, "Weight initializations per split")->check(CLI::PositiveNumber);
      cmd.add_flag("--full-protocol", full_protocol, "Use 10 splits x 8 seeds");
    }
  }

  TrainConfig resolve() const {
    TrainConfig c = cfg;
    c.semantics = semantics == "eq4" ? AccumulationSemantics::kNodeCentric : AccumulationSemantics::kPerIncidentEdge;
    if (full_protocol) {
      c.num_splits = kFullProtocolSplits;
      c.num_seeds = kFullProtocolSeeds;
    }
    return c;
  }
};

void add_check_tolerance(CLI::App& cmd, double& tol) {
  cmd.add_option("--tolerance", tol, "Largest accepted relative error")->check(CLI::PositiveNumber);
}

std::ofstream open_append(const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::app);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return f;
}

void append_run_log(const std::string& out_dir, const RunMetrics& m, const TrainConfig& cfg) {
  auto f = open_append(fs::path(out_dir) / "runs.jsonl");
  write_run_log(f, m, cfg);
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

std::string checkpoint_name(const DatasetBundle& b, const TrainConfig& cfg) {
  std::ostringstream s;
  s << b.name << "_p" << cfg.aggregator.p << "_alpha-" << alpha_label(cfg.aggregator.alpha) << "_seed"
    << cfg.master_seed << ".ckpt";
  return s.str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hypergraph node classification with generalized-mean aggregation", "hypersage"};
  app.option_defaults()->always_capture_default();
  app.get_formatter()->column_width(46);
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every command");

  // convert
  std::string edges_path, features_path, labels_path, convert_out;
  RawFormat raw;
  bool sparse = false;
  std::size_t num_features = 0;
  auto* convert = app.add_subcommand("convert", "Convert raw edge/feature/label files to the dataset layout");
  convert->add_option("--edges", edges_path, "One hyperedge per line")->required()->check(CLI::ExistingFile);
  convert->add_option("--features", features_path, "Dense rows or 'node col value' triples")
      ->required()
      ->check(CLI::ExistingFile);
  convert->add_option("--labels", labels_path, "One label per line or 'node label' pairs")
      ->required()
      ->check(CLI::ExistingFile);
  convert->add_option("--out", convert_out, "Output dataset directory")->required()->type_name("DIR");
  convert->add_option("--name", raw.name, "Dataset name recorded in meta.json");
  convert->add_flag("--sparse", sparse, "Features are 'node col value' triples");
  convert->add_option("--num-features", num_features, "Feature dimension for sparse input");
  convert->add_flag("--one-indexed", raw.one_indexed, "Node and column ids start at 1");

  // stats
  std::string stats_data;
  auto* stats = app.add_subcommand("stats", "Print node, edge, feature and class counts");
  stats->add_option("--data", stats_data, "Dataset directory")->required()->type_name("DIR");

  // train
  TrainFlags train_flags;
  double train_p = 1.0;
  std::string train_alpha = "max", train_checkpoint;
  auto* train = app.add_subcommand("train", "Train one model and write a checkpoint and a run-log line");
  train->add_option("--p", train_p, "Generalized-mean exponent (nonzero)");
  train->add_option("--alpha", train_alpha, "Neighbors sampled per hyperedge, or 'max'")->check(kAlphaValidator);
  train->add_option("--checkpoint", train_checkpoint, "Checkpoint path (default: derived from the run under --out)")
      ->type_name("FILE");
  train_flags.add_to(*train, false);

  // eval
  TrainFlags eval_flags;
  double eval_p = 1.0;
  std::string eval_alpha = "max", eval_checkpoint;
  auto* eval = app.add_subcommand("eval", "Run the repeat protocol, or score a checkpoint on a held-out split");
  eval->add_option("--p", eval_p, "Generalized-mean exponent (nonzero)");
  eval->add_option("--alpha", eval_alpha, "Neighbors sampled per hyperedge, or 'max'")->check(kAlphaValidator);
  eval->add_option("--checkpoint", eval_checkpoint, "Score this checkpoint instead of training")
      ->check(CLI::ExistingFile);
  eval_flags.add_to(*eval, true);

  // sweep
  TrainFlags sweep_flags;
  std::vector<double> sweep_p{-1.0, 0.01, 1.0, 2.0, 3.0, 5.0};
  std::vector<std::string> sweep_alpha{"2", "3", "5", "10"};
  auto* sweep = app.add_subcommand("sweep", "Accuracy grid over p and alpha as TSV");
  sweep->add_option("--p", sweep_p, "Comma-separated exponents")->delimiter(',');
  sweep->add_option("--alpha", sweep_alpha, "Comma-separated budgets ('max' allowed)")
      ->delimiter(',')
      ->check(kAlphaValidator);
  sweep_flags.add_to(*sweep, true);

  // stability
  TrainFlags stab_flags;
  double stab_p = 1.0;
  std::string stab_alpha = "max";
  std::vector<double> fractions{0.05, 0.1, 0.2, 0.3, 0.5};
  auto* stability = app.add_subcommand("stability", "Accuracy against train fraction as TSV");
  stability->add_option("--p", stab_p, "Generalized-mean exponent (nonzero)");
  stability->add_option("--alpha", stab_alpha, "Neighbors sampled per hyperedge, or 'max'")->check(kAlphaValidator);
  stability->add_option("--fractions", fractions, "Comma-separated train fractions")
      ->delimiter(',')
      ->check(CLI::Range(0.0, 1.0));
  stab_flags.add_to(*stability, true);

  // inductive
  TrainFlags ind_flags;
  double ind_p = 1.0;
  std::string ind_alpha = "max";
  auto* inductive = app.add_subcommand("inductive", "Seen and unseen test accuracy with unseen nodes held out");
  inductive->add_option("--p", ind_p, "Generalized-mean exponent (nonzero)");
  inductive->add_option("--alpha", ind_alpha, "Neighbors sampled per hyperedge, or 'max'")->check(kAlphaValidator);
  ind_flags.add_to(*inductive, true);

  // check-invariance
  InvarianceTrialConfig inv;
  double inv_tol = 1e-6;
  auto* check_inv = app.add_subcommand("check-invariance", "Randomized hyperedge-split invariance trials");
  check_inv->add_option("--nodes", inv.max_nodes, "Largest hypergraph drawn")->check(CLI::Range(3, 1 << 20));
  check_inv->add_option("--edges", inv.num_edges, "Hyperedges per hypergraph")->check(CLI::PositiveNumber);
  check_inv->add_option("--trials", inv.trials, "Trials per exponent");
  check_inv->add_option("--p", inv.p_values, "Comma-separated exponents")->delimiter(',');
  check_inv->add_option("--dim", inv.feature_dim, "Feature columns")->check(CLI::PositiveNumber);
  check_inv->add_option("--seed", inv.seed, "Trial seed");
  add_check_tolerance(*check_inv, inv_tol);

  // grad-check
  ModelGradCheckConfig grad;
  std::vector<double> grad_p{-1.0, 0.01, 1.0, 2.0};
  double grad_tol = 1e-4;
  auto* grad_check = app.add_subcommand("grad-check", "Finite-difference check of the model gradient");
  grad_check->add_option("--nodes", grad.nodes, "Nodes in the random hypergraph")->check(CLI::Range(2, 1 << 16));
  grad_check->add_option("--edges", grad.num_edges, "Hyperedges in the random hypergraph");
  grad_check->add_option("--p", grad_p, "Comma-separated exponents")->delimiter(',');
  grad_check->add_option("--hidden", grad.hidden, "Hidden layer width")->check(CLI::PositiveNumber);
  grad_check->add_option("--coordinates", grad.coordinates, "Weights sampled per exponent (0 = all)");
  grad_check->add_option("--seed", grad.seed, "Check seed");
  add_check_tolerance(*grad_check, grad_tol);

  std::vector<std::string> storage{"hypersage"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*convert) {
      if (sparse) {
        if (num_features == 0) throw InvalidArgument("--sparse needs --num-features");
        raw.features = RawFormat::Features::kSparseTriples;
        raw.num_features = num_features;
      }
      const auto report = convert_external(edges_path, features_path, labels_path, raw, convert_out);
      for (const auto& w : report.warnings) err << "warning: " << w << '\n';
      const auto s = dataset_stats(report.bundle);
      out << "wrote " << convert_out << ": " << s.num_nodes << " nodes, " << s.num_edges << " hyperedges, "
          << s.num_features << " features, " << s.num_classes << " classes\n";
    } else if (*stats) {
      const auto b = load_dataset(stats_data);
      const auto s = dataset_stats(b);
      out << "dataset\t" << b.name << "\nnodes\t" << s.num_nodes << "\nhyperedges\t" << s.num_edges
          << "\nfeatures\t" << s.num_features << "\nclasses\t" << s.num_classes << "\nmean_cardinality\t"
          << fixed(s.mean_cardinality, 3) << "\nstd_cardinality\t" << fixed(s.std_cardinality, 3) << '\n';
    } else if (*train) {
      TrainConfig cfg = train_flags.resolve();
      cfg.aggregator.p = train_p;
      cfg.aggregator.alpha = parse_alpha(train_alpha);
      cfg.num_splits = cfg.num_seeds = 1;
      cfg.validate();
      const auto b = load_dataset(train_flags.data);
      const auto split = make_transductive_split(b, cfg.train_fraction, split_seed_for(cfg.master_seed, 0));
      const auto result = train_one(b, split, cfg, weight_seed_for(cfg.master_seed, 0));
      const fs::path ckpt =
          train_checkpoint.empty() ? fs::path(train_flags.out) / checkpoint_name(b, cfg) : fs::path(train_checkpoint);
      if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
      save_checkpoint(ckpt, Checkpoint{result.params, cfg.aggregator, cfg.semantics});
      append_run_log(train_flags.out, RunMetrics::from_runs({result.record}), cfg);
      out << "accuracy\t" << fixed(result.record.accuracy, 4) << "\ncheckpoint\t" << ckpt.string() << '\n';
    } else if (*eval) {
      TrainConfig cfg = eval_flags.resolve();
      cfg.aggregator.p = eval_p;
      cfg.aggregator.alpha = parse_alpha(eval_alpha);
      cfg.validate();
      const auto b = load_dataset(eval_flags.data);
      if (!eval_checkpoint.empty()) {
        const auto ckpt = load_checkpoint(eval_checkpoint);
        const auto split = make_transductive_split(b, cfg.train_fraction, split_seed_for(cfg.master_seed, 0));
        ForwardConfig fwd;
        fwd.aggregator = ckpt.aggregator;
        fwd.semantics = ckpt.semantics;
        const auto predicted = predict(forward(b.hypergraph, b.features, ckpt.params, fwd));
        out << "accuracy\t" << fixed(accuracy(predicted, b.labels, split.test_ids), 4) << '\n';
      } else {
        const auto m = run_protocol(b, cfg);
        append_run_log(eval_flags.out, m, cfg);
        out << "accuracy\t" << format_metrics(m) << "\nruns\t" << m.runs.size() << '\n';
      }
    } else if (*sweep) {
      TrainConfig cfg = sweep_flags.resolve();
      std::vector<std::optional<std::size_t>> alphas;
      for (const auto& a : sweep_alpha) alphas.push_back(parse_alpha(a));
      cfg.validate();
      const auto b = load_dataset(sweep_flags.data);
      const auto grid = sweep_p_alpha(b, sweep_p, alphas, cfg);
      for (std::size_t i = 0; i < grid.p_values.size(); ++i) {
        for (std::size_t j = 0; j < grid.alpha_values.size(); ++j) {
          TrainConfig cell = cfg;
          cell.aggregator.p = grid.p_values[i];
          cell.aggregator.alpha = grid.alpha_values[j];
          append_run_log(sweep_flags.out, grid.cells[i][j], cell);
        }
      }
      write_sweep_tsv(out, grid);
    } else if (*stability) {
      TrainConfig cfg = stab_flags.resolve();
      cfg.aggregator.p = stab_p;
      cfg.aggregator.alpha = parse_alpha(stab_alpha);
      cfg.validate();
      const auto b = load_dataset(stab_flags.data);
      const auto curve = stability_curve(b, fractions, cfg);
      for (const auto& row : curve.rows) append_run_log(stab_flags.out, row.metrics, cfg);
      write_stability_tsv(out, curve);
      if (!curve.monotone) err << "note: mean accuracy is not monotone in the train fraction\n";
    } else if (*inductive) {
      TrainConfig cfg = ind_flags.resolve();
      cfg.aggregator.p = ind_p;
      cfg.aggregator.alpha = parse_alpha(ind_alpha);
      cfg.validate();
      const auto b = load_dataset(ind_flags.data);
      const auto res = inductive_eval(b, cfg);
      append_run_log(ind_flags.out, res.seen, cfg);
      out << "seen\t" << format_metrics(res.seen) << "\nunseen\t" << format_metrics(res.unseen) << "\ngap\t"
          << fixed(100.0 * (res.seen.mean - res.unseen.mean), 1) << '\n';
    } else if (*check_inv) {
      const auto s = run_invariance_trials(inv);
      out << "trials\t" << s.trials << "\nmax_relative_deviation\t" << s.max_rel_deviation
          << "\nmax_absolute_deviation\t" << s.max_abs_deviation << "\nworst_p\t" << s.worst_p << "\nworst_trial\t"
          << s.worst_trial << '\n';
      if (!(s.max_rel_deviation <= inv_tol)) throw CheckFailed("split invariance exceeded tolerance");
    } else if (*grad_check) {
      bool ok = true;
      out << "p\tchecked\tskipped_kinks\tmax_relative_error\n";
      for (double p : grad_p) {
        ModelGradCheckConfig c = grad;
        c.aggregator.p = p;
        const auto r = model_gradient_check(c);
        out << p << '\t' << r.checked << '\t' << r.skipped_kinks << '\t' << r.max_relative_error << '\n';
        ok = ok && r.max_relative_error < grad_tol;
      }
      if (!ok) throw CheckFailed("gradient check exceeded tolerance");
    }
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const DatasetError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitFailure;
  } catch (const CheckFailed& e) {
    err << "check failed: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace hypersage::cli
