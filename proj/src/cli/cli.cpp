#include "nag/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "nag/data_io.hpp"
#include "nag/errors.hpp"
#include "nag/model.hpp"
#include "nag/pipeline.hpp"
#include "nag/trainer.hpp"

namespace nag::cli {
namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// "key=value" lines, '#' comments, blank lines ignored.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file not found: " + path);
  std::vector<std::pair<std::string, std::string>> items;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos || trim(body.substr(0, eq)).empty())
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
    items.emplace_back(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
  }
  return items;
}

std::optional<std::string> find_config_arg(const std::vector<std::string>& args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return std::nullopt;
}

bool flag_given(const std::vector<std::string>& args, const std::string& name) {
  return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
    return a == name || a.rfind(name + "=", 0) == 0;
  });
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + key + "' expects a boolean, got '" + v + "'");
}

// Config values become ordinary flags placed before the command line ones, so
// a flag given on the command line always wins.
std::vector<std::string> merge_config(CLI::App& sub, const std::vector<std::string>& sub_args) {
  const auto path = find_config_arg(sub_args);
  if (!path) return sub_args;
  std::vector<std::string> merged;
  for (const auto& [key, value] : read_config_file(*path)) {
    const std::string name = "--" + key;
    const CLI::Option* opt = sub.get_option_no_throw(name);
    if (opt == nullptr || key == "config" || key == "help")
      throw ConfigError("unknown config key '" + key + "' for " + sub.get_name());
    if (flag_given(sub_args, name)) continue;
    if (opt->get_expected_min() == 0) {
      if (parse_bool(key, value)) merged.push_back(name);
    } else {
      merged.push_back(name);
      merged.push_back(value);
    }
  }
  merged.insert(merged.end(), sub_args.begin(), sub_args.end());
  return merged;
}

SplitFractions parse_fractions(const std::string& text) {
  SplitFractions f;
  double* slots[3] = {&f.train, &f.val, &f.test};
  std::size_t i = 0;
  std::string_view rest(text);
  while (true) {
    const auto comma = rest.find(',');
    const std::string part = trim(rest.substr(0, comma));
    if (i >= 3) throw ConfigError("--split-frac expects three comma-separated fractions, got '" + text + "'");
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), *slots[i]);
    if (ec != std::errc() || ptr != part.data() + part.size() || part.empty())
      throw ConfigError("--split-frac: not a number '" + part + "'");
    ++i;
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  if (i != 3) throw ConfigError("--split-frac expects three comma-separated fractions, got '" + text + "'");
  return f;
}

struct LabelInputs {
  std::string labels;
  std::string splits;
  std::string split_frac = "0.6,0.2,0.2";
  std::uint64_t split_seed = 0;
};

void add_label_options(CLI::App* sub, LabelInputs& li) {
  sub->add_option("--labels", li.labels, "Labels CSV (node_id,label)")->required();
  sub->add_option("--splits", li.splits, "Splits file with [train]/[val]/[test] sections; empty generates splits");
  sub->add_option("--split-frac", li.split_frac, "Train,val,test fractions when no splits file is given");
  sub->add_option("--split-seed", li.split_seed, "Seed for generated splits");
}

LabeledSplits load_labels(const LabelInputs& li, std::size_t n) {
  LabeledSplits d;
  d.labels = labels_for(read_labels(li.labels), n, li.labels);
  if (!li.splits.empty()) {
    d.splits = read_splits(li.splits);
  } else {
    d.splits = labeled_splits(d.labels, parse_fractions(li.split_frac), li.split_seed);
  }
  validate_splits(d.splits, d.labels);
  return d;
}

EigenSolver parse_solver(const std::string& s) {
  if (s == "auto") return EigenSolver::automatic;
  if (s == "dense") return EigenSolver::dense;
  if (s == "lanczos") return EigenSolver::lanczos;
  throw ConfigError("unknown solver '" + s + "'");
}

struct PreprocessArgs {
  std::string graph, features, out, solver = "auto";
  std::uint32_t k = default_hops;
  std::size_t eig_s = default_eigenvector_count;
  std::size_t nodes = 0;
  bool no_structural = false;
};

struct TrainArgs {
  std::string tokens, out_model, report, summary, readout = "attention";
  LabelInputs labels;
  TrainConfig train;
  std::uint32_t k = 0;
  std::uint32_t hidden = 128;
  std::uint32_t layers = 1;
  std::uint32_t heads = 1;
  std::uint32_t classes = 0;
  bool head_hidden = false;
};

struct EvaluateArgs {
  std::string model, tokens, split = "test";
  LabelInputs labels;
};

struct GradcheckArgs {
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
  double step = 1e-5;
};

struct SbmArgs {
  SbmSpec spec;
  std::string out_dir;
};

int cmd_preprocess(const PreprocessArgs& a, std::ostream& out) {
  std::optional<std::size_t> n;
  if (a.nodes > 0) n = a.nodes;
  const GraphInputs g = load_graph_inputs(a.graph, a.features, n);
  PreprocessOptions opts;
  opts.K = a.k;
  opts.s = a.eig_s;
  opts.structural = !a.no_structural;
  opts.spectral.solver = parse_solver(a.solver);
  const TokenTensor t = preprocess(g.adjacency, g.features, opts);
  write_cache(t, a.out);
  out << "n=" << t.n() << " K=" << t.K() << " d_prime=" << t.d_prime() << " s=" << t.meta().s
      << " hash=" << to_hex(t.meta().input_hash) << "\n";
  return 0;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  a.train.validate();
  const TokenTensor tokens = read_cache(a.tokens);
  if (a.k != 0 && a.k != tokens.K()) {
    throw ConfigError("requested model K=" + std::to_string(a.k) + " but token cache " + a.tokens +
                      " has K=" + std::to_string(tokens.K()));
  }
  const LabeledSplits data = load_labels(a.labels, tokens.n());
  ModelConfig cfg;
  cfg.K = static_cast<std::uint32_t>(tokens.K());
  cfg.d_prime = static_cast<std::uint32_t>(tokens.d_prime());
  cfg.d_model = a.hidden;
  cfg.layers = a.layers;
  cfg.heads = a.heads;
  cfg.readout = parse_readout(a.readout);
  cfg.use_structural = tokens.meta().s > 0;
  cfg.head_hidden = a.head_hidden;
  std::int32_t max_label = -1;
  for (auto l : data.labels) max_label = std::max(max_label, l);
  cfg.classes = a.classes != 0 ? a.classes : static_cast<std::uint32_t>(max_label + 1);
  if (max_label >= static_cast<std::int32_t>(cfg.classes))
    throw DataError("label " + std::to_string(max_label) + " out of range for " + std::to_string(cfg.classes) + " classes");

  TrainResult r = train(data, tokens, cfg, init_params(cfg, a.train.seed), a.train);
  save_model(r.best, cfg, a.out_model);
  write_report(r.report, a.report);
  write_summary_json(r.report, a.summary.empty() ? a.report + ".json" : a.summary);
  out << "epochs=" << r.report.epochs.size() << " best_epoch=" << r.report.best_epoch
      << " best_val_acc=" << fmt("%.6f", r.report.best_val_accuracy);
  if (r.report.has_test) out << " test_acc=" << fmt("%.6f", r.report.test_accuracy);
  out << " wall_seconds=" << fmt("%.3f", r.report.wall_seconds) << "\n";
  return 0;
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const LoadedModel m = load_model(a.model);
  const TokenTensor tokens = read_cache(a.tokens);
  check_compatible(m.config, tokens);
  const LabeledSplits data = load_labels(a.labels, tokens.n());
  const std::vector<node_t>& split =
      a.split == "train" ? data.splits.train : a.split == "val" ? data.splits.val : data.splits.test;
  if (split.empty()) throw ConfigError("split '" + a.split + "' is empty");
  for (node_t id : split)
    if (data.labels[id] >= static_cast<std::int32_t>(m.config.classes))
      throw DataError("label of node " + std::to_string(id) + " exceeds the model's " +
                      std::to_string(m.config.classes) + " classes");
  const double acc = evaluate(m.config, m.params, tokens, data.labels, split);
  out << "accuracy=" << fmt("%.6f", acc) << "\n";
  return 0;
}

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out, std::ostream& err) {
  GradCheckOptions opts;
  opts.tolerance = a.tolerance;
  opts.step = a.step;
  opts.seed = a.seed;
  const GradCheckReport report = model_gradcheck(a.seed, opts);
  out << report.format();
  if (report.passed()) return 0;
  const LeafCheck* w = report.worst();
  err << "error: gradient check failed; worst leaf " << w->name << " rel_error=" << fmt("%.3e", w->worst_error)
      << "\n";
  return static_cast<int>(ErrorKind::internal);
}

int cmd_synth_sbm(const SbmArgs& a, std::ostream& out) {
  a.spec.validate();
  const GraphDataset ds = generate_sbm(a.spec);
  const DatasetFiles files = write_dataset(ds, a.out_dir);
  std::size_t edges = ds.adjacency.col_indices.size() / 2;
  out << "n=" << ds.n << " edges=" << edges << " d=" << ds.d() << " classes=" << ds.classes << "\n"
      << "graph=" << files.graph << "\nfeatures=" << files.features << "\nlabels=" << files.labels
      << "\nsplits=" << files.splits << "\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"NAGphormer node classification: tokenize graphs, train and evaluate", "nagphormer"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");
  std::string config_path;
  const auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key=value file; flags on the command line take precedence");
  };

  PreprocessArgs pre;
  auto* p = app.add_subcommand("preprocess", "Build the hop token cache for a graph");
  p->add_option("--graph", pre.graph, "Edge list (u v per line)")->required();
  p->add_option("--features", pre.features, "Features CSV with a d=<int> header")->required();
  p->add_option("--k", pre.k, "Number of propagation hops K")->check(CLI::Range(1u, max_hops));
  p->add_option("--eig-s", pre.eig_s, "Laplacian eigenvectors appended to the features");
  p->add_flag("--no-structural", pre.no_structural, "Skip the eigenvector features (s=0)");
  p->add_option("--nodes", pre.nodes, "Node count; 0 infers it from the inputs");
  p->add_option("--solver", pre.solver, "Eigensolver")->check(CLI::IsMember({"auto", "dense", "lanczos"}));
  p->add_option("--out", pre.out, "Output token cache")->required();
  add_config(p);

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model on a token cache");
  t->add_option("--tokens", tr.tokens, "Token cache from preprocess")->required();
  add_label_options(t, tr.labels);
  t->add_option("--readout", tr.readout, "Hop readout")->check(CLI::IsMember({"attention", "sum", "single"}));
  t->add_option("--k", tr.k, "Expected K of the cache; 0 accepts the cache's K");
  t->add_option("--hidden", tr.hidden, "Model width d_m");
  t->add_option("--layers", tr.layers, "Transformer layers");
  t->add_option("--heads", tr.heads, "Attention heads");
  t->add_option("--classes", tr.classes, "Class count; 0 infers 1 + largest label");
  t->add_flag("--head-hidden", tr.head_hidden, "Add a GELU hidden layer before the classifier");
  t->add_option("--lr", tr.train.lr, "Learning rate");
  t->add_option("--weight-decay", tr.train.weight_decay, "Decoupled weight decay");
  t->add_option("--batch-size", tr.train.batch_size, "Mini-batch size");
  t->add_option("--max-epochs", tr.train.max_epochs, "Epoch limit");
  t->add_option("--patience", tr.train.patience, "Epochs without validation improvement before stopping");
  t->add_option("--seed", tr.train.seed, "Seed for initialization and shuffling");
  t->add_option("--out-model", tr.out_model, "Model file to write")->required();
  t->add_option("--report", tr.report, "key=value training report to write")->required();
  t->add_option("--summary", tr.summary, "JSON summary; empty writes <report>.json");
  add_config(t);

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Accuracy of a trained model on one split");
  e->add_option("--model", ev.model, "Model file")->required();
  e->add_option("--tokens", ev.tokens, "Token cache")->required();
  add_label_options(e, ev.labels);
  e->add_option("--split", ev.split, "Split to score")->check(CLI::IsMember({"train", "val", "test"}));
  add_config(e);

  GradcheckArgs gc;
  auto* g = app.add_subcommand("gradcheck", "Finite-difference check of every model gradient");
  g->add_option("--seed", gc.seed, "Seed for the graph, parameters and batch");
  g->add_option("--tolerance", gc.tolerance, "Maximum relative error");
  g->add_option("--step", gc.step, "Central-difference step");
  add_config(g);

  SbmArgs sbm;
  auto* s = app.add_subcommand("synth-sbm", "Write a stochastic block model dataset");
  s->add_option("--nodes", sbm.spec.n, "Node count");
  s->add_option("--blocks", sbm.spec.blocks, "Number of blocks (classes)");
  s->add_option("--p-in", sbm.spec.p_in, "Edge probability within a block");
  s->add_option("--p-out", sbm.spec.p_out, "Edge probability across blocks");
  s->add_option("--feature-dim", sbm.spec.feature_dim, "Feature dimension");
  s->add_option("--signal", sbm.spec.feature_signal, "Mean shift of a block's feature dimension");
  s->add_option("--seed", sbm.spec.seed, "Generator seed");
  s->add_option("--out-dir", sbm.out_dir, "Output directory")->required();
  add_config(s);

  // Flags and options without a captured default still document one in --help.
  for (CLI::App* sub : {p, t, e, g, s}) {
    for (CLI::Option* opt : sub->get_options()) {
      if (opt->get_name() == "--help" || opt->get_name() == "--help-all" || opt->get_required()) continue;
      if (opt->get_expected_min() == 0)
        opt->description(opt->get_description() + " [default: off]");
      else if (opt->get_default_str().empty())
        opt->description(opt->get_description() + " [default: none]");
    }
  }

  try {
    std::vector<std::string> merged = args;
    if (!args.empty()) {
      if (CLI::App* sub = app.get_subcommand_no_throw(args.front())) {
        std::vector<std::string> rest(args.begin() + 1, args.end());
        merged = merge_config(*sub, rest);
        merged.insert(merged.begin(), args.front());
      }
    }
    std::reverse(merged.begin(), merged.end());
    try {
      app.parse(merged);
    } catch (const CLI::ParseError& pe) {
      const int code = app.exit(pe, out, err);
      return code == 0 ? 0 : static_cast<int>(ErrorKind::config);
    }
    if (p->parsed()) return cmd_preprocess(pre, out);
    if (t->parsed()) return cmd_train(tr, out);
    if (e->parsed()) return cmd_evaluate(ev, out);
    if (g->parsed()) return cmd_gradcheck(gc, out, err);
    if (s->parsed()) return cmd_synth_sbm(sbm, out);
    throw InternalError("no subcommand dispatched");
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return static_cast<int>(ex.kind());
  } catch (const std::bad_alloc&) {
    err << "error: out of memory\n";
    return static_cast<int>(ErrorKind::internal);
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return static_cast<int>(ErrorKind::internal);
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace nag::cli
