// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hsf/analysis.hpp"
#include "hsf/classifier.hpp"
#include "hsf/error.hpp"
#include "hsf/evaluation.hpp"
#include "hsf/feature.hpp"
#include "hsf/hidden_state_io.hpp"
#include "hsf/synthetic.hpp"

namespace hsf::cli {

namespace {

constexpr const char* kSeedHelp =
    "Seed for every random choice; identical flags and inputs give "
    "byte-identical outputs";

struct TrainFlags {
  std::string arch = "mlp";
  std::size_t hidden = 256;
  double dropout = 0.2;
  double lr = 1e-3;
  int epochs = 50;
  std::size_t batch = 64;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--arch", f.arch, "Classifier architecture")
      ->check(CLI::IsMember({"mlp", "linear"}))
      ->capture_default_str();
  cmd->add_option("--hidden", f.hidden, "MLP hidden width")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--dropout", f.dropout, "Dropout rate in [0, 1)")
      ->check(CLI::Range(0.0, 0.999999))
      ->capture_default_str();
  cmd->add_option("--lr", f.lr, "Adam learning rate")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--epochs", f.epochs, "Training epochs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--batch", f.batch, "Mini-batch size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

ClassifierConfig make_config(const TrainFlags& f, int k, std::size_t hidden_dim,
                             std::uint64_t seed) {
  ClassifierConfig c;
  c.architecture = f.arch == "linear" ? Architecture::Linear : Architecture::Mlp1;
  c.k = k;
  c.input_dim = feature_length(k, hidden_dim);
  c.hidden_width = f.hidden;
  c.dropout_rate = f.dropout;
  c.learning_rate = f.lr;
  c.epochs = f.epochs;
  c.batch_size = f.batch;
  c.seed = seed;
  return c;
}

DatasetFormat parse_format(const std::string& s) {
  return s == "debug" ? DatasetFormat::DebugText : DatasetFormat::Binary;
}

ReportFormat parse_report_format(const std::string& s) {
  return s == "csv" ? ReportFormat::Csv : ReportFormat::Markdown;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  return os;
}

void close_out(std::ofstream& os, const std::string& path) {
  os.close();
  if (!os) throw IoError("write to '" + path + "' failed");
}

/// Parses "7", "1..8" or "1,3,5".
std::vector<int> parse_k_values(const std::string& spec) {
  std::vector<int> ks;
  const auto to_int = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw RangeError("bad --k value '" + spec + "'");
    }
  };
  if (const auto dots = spec.find(".."); dots != std::string::npos) {
    const int lo = to_int(spec.substr(0, dots));
    const int hi = to_int(spec.substr(dots + 2));
    if (lo > hi) throw RangeError("empty --k range '" + spec + "'");
    for (int k = lo; k <= hi; ++k) ks.push_back(k);
  } else {
    std::stringstream ss(spec);
    for (std::string part; std::getline(ss, part, ',');) ks.push_back(to_int(part));
  }
  for (int k : ks) {
    if (k < kMinTokens || k > kMaxTokens) {
      throw RangeError("k = " + std::to_string(k) + " outside [1, 8]");
    }
  }
  return ks;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string preset;
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "binary";
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const Dataset ds = generate(preset(parse_preset(a.preset), a.seed));
  save_dataset(ds, a.out, parse_format(a.format));
  out << "wrote " << ds.size() << " records (hidden_dim " << ds.hidden_dim << ") to "
      << a.out << "\n";
  return kOk;
}

struct ConvertArgs {
  std::string data;
  std::string out;
  std::string format = "binary";
  std::uint64_t seed = 0;
};

int cmd_convert(const ConvertArgs& a, std::ostream& out) {
  const Dataset ds = load_dataset(a.data);
  save_dataset(ds, a.out, parse_format(a.format));
  out << "converted " << ds.size() << " records to " << a.format << " at " << a.out << "\n";
  return kOk;
}

struct TrainArgs {
  std::string data;
  int k = kDefaultK;
  std::string out;
  std::string history;
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  TrainFlags flags;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const Dataset ds = load_dataset(a.data);
  const auto design_all = batch_assemble(ds, a.k);  // surfaces short records early
  (void)design_all;
  auto [train_ds, val_ds] = split_dataset(
      ds, {.train_fraction = a.train_fraction, .seed = a.seed, .stratify = true});
  const auto config = make_config(a.flags, a.k, ds.hidden_dim, a.seed);
  const auto result = train(batch_assemble(train_ds, a.k), batch_assemble(val_ds, a.k), config);
  save_params(result.params, a.out);

  if (!a.history.empty()) {
    auto os = open_out(a.history);
    os << "epoch,train_loss,val_loss,val_auc\n";
    for (std::size_t e = 0; e < result.history.size(); ++e) {
      const auto& h = result.history[e];
      os << e + 1 << ',' << fmt(h.train_loss) << ','
         << (h.val_loss ? fmt(*h.val_loss) : "") << ','
         << (h.val_auc ? fmt(*h.val_auc) : "") << '\n';
    }
    close_out(os, a.history);
  }

  const auto& best = result.history[static_cast<std::size_t>(result.best_epoch)];
  out << "trained on " << train_ds.size() << " records, validated on " << val_ds.size()
      << " (k = " << a.k << ", input_dim = " << config.input_dim << ")\n";
  out << "best epoch " << result.best_epoch + 1 << " of " << result.history.size() << "\n";
  out << "val AUC: " << (best.val_auc ? fmt(*best.val_auc) : std::string("n/a")) << "\n";
  return kOk;
}

struct FilterArgs {
  std::string params;
  std::string data;
  double beta = kDefaultBeta;
  std::string out;
  std::uint64_t seed = 0;
};

int cmd_filter(const FilterArgs& a, std::ostream& out) {
  const auto params = load_params(a.params);
  const Dataset ds = load_dataset(a.data);
  const auto design = batch_assemble(ds, params.config.k);

  auto os = open_out(a.out);
  std::size_t blocked[2] = {0, 0};
  std::size_t total[2] = {0, 0};
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto d = filter_decision(params, design.x.row(i), a.beta);
    const int label = design.labels[i];
    ++total[label];
    if (d.verdict == Verdict::Block) ++blocked[label];
    nlohmann::ordered_json j;
    j["id"] = ds.records[i].id;
    j["score"] = d.score;
    j["verdict"] = d.verdict == Verdict::Block ? "block" : "allow";
    os << j.dump() << '\n';
  }
  close_out(os, a.out);
  out << "blocked " << blocked[0] + blocked[1] << " of " << ds.size()
      << " records (harmful " << blocked[1] << "/" << total[1] << ", benign " << blocked[0]
      << "/" << total[0] << ") at beta " << fmt(a.beta) << "\n";
  return kOk;
}

struct EvalArgs {
  std::string params;
  std::string data;
  std::string verdicts;
  double beta = kDefaultBeta;
  std::string out;
  std::string format = "md";
  std::string roc;
  std::string model_tag;
  std::uint64_t seed = 0;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const auto params = load_params(a.params);
  const Dataset ds = load_dataset(a.data);
  std::vector<JudgeVerdict> verdicts;
  std::optional<std::span<const JudgeVerdict>> verdict_view;
  if (!a.verdicts.empty()) {
    verdicts = load_verdicts(a.verdicts);
    verdict_view = verdicts;
  }
  const EvalReport report = evaluate(params, ds, a.beta, verdict_view, a.model_tag);

  auto os = open_out(a.out);
  render_report(std::span<const EvalReport>(&report, 1), os, parse_report_format(a.format));
  close_out(os, a.out);

  if (!a.roc.empty()) {
    auto ros = open_out(a.roc);
    ros << "fpr,tpr\n";
    for (const auto& p : report.roc) ros << fmt(p.fpr) << ',' << fmt(p.tpr) << '\n';
    close_out(ros, a.roc);
  }

  out << "k = " << report.k << ", beta = " << fmt(report.beta)
      << ", AUC = " << (report.auc ? fmt(*report.auc) : std::string("n/a"))
      << ", FPR = " << (report.fpr_at_beta ? fmt(*report.fpr_at_beta) : std::string("n/a"))
      << "\n";
  if (!verdicts.empty()) {
    out << "undefended ASR over " << verdicts.size()
        << " verdicts: " << fmt(attack_success_rate(verdicts)) << "%\n";
  }
  for (const auto& [tag, asr] : report.asr_by_dataset) {
    out << "defended ASR [" << tag << "]: " << fmt(asr) << "%\n";
  }
  return kOk;
}

struct AblateArgs {
  std::string data;
  std::string k = "1..8";
  std::string out;
  std::string format = "md";
  double beta = kDefaultBeta;
  std::string model_tag;
  unsigned threads = 0;
  std::uint64_t seed = 0;
  TrainFlags flags;
};

int cmd_ablate(const AblateArgs& a, std::ostream& out) {
  const Dataset ds = load_dataset(a.data);
  AblationOptions options;
  options.k_values = parse_k_values(a.k);
  options.config = make_config(a.flags, kDefaultK, ds.hidden_dim, a.seed);
  options.seed = a.seed;
  options.beta = a.beta;
  options.model_tag = a.model_tag;
  options.threads = a.threads;
  const auto by_k = ablate_k(ds, options);

  std::vector<EvalReport> reports;
  for (const auto& [k, r] : by_k) reports.push_back(r);
  auto os = open_out(a.out);
  render_report(reports, os, parse_report_format(a.format));
  close_out(os, a.out);

  for (const auto& [k, r] : by_k) {
    out << "k = " << k << ": AUC " << (r.auc ? fmt(*r.auc) : std::string("n/a")) << ", FPR "
        << (r.fpr_at_beta ? fmt(*r.fpr_at_beta) : std::string("n/a")) << "\n";
  }
  return kOk;
}

struct PcaArgs {
  std::string data;
  std::string out;
  std::vector<std::string> classes = {"benign", "harmful", "jailbreak"};
  std::vector<std::string> jailbreak_tags = {"jailbreak"};
  std::string method = "auto";
  std::uint64_t seed = 0;
};

int cmd_pca(const PcaArgs& a, std::ostream& out) {
  const Dataset ds = load_dataset(a.data);
  const std::set<std::string> wanted(a.classes.begin(), a.classes.end());
  const std::set<std::string> jb_tags(a.jailbreak_tags.begin(), a.jailbreak_tags.end());

  std::vector<PlotClass> classes;
  std::vector<int> labels;
  std::vector<const HiddenStateRecord*> picked;
  for (const auto& r : ds.records) {
    PlotClass c = PlotClass::Benign;
    if (r.label == Label::Harmful) {
      c = jb_tags.contains(r.source_tag) ? PlotClass::Jailbreak : PlotClass::Harmful;
    }
    if (!wanted.contains(to_string(c))) continue;
    picked.push_back(&r);
    classes.push_back(c);
    labels.push_back(to_int(r.label));
  }

  Matrix rows(picked.size(), ds.hidden_dim);
  for (std::size_t i = 0; i < picked.size(); ++i) {
    const auto last = picked[i]->last_token();
    std::copy(last.begin(), last.end(), rows.row(i).begin());
  }
  const PcaModel model = pca_fit(rows);
  const auto points = pca_project(model, rows);

  std::optional<LinearBoundary> boundary;
  const bool both = std::count(labels.begin(), labels.end(), 1) >= 2 &&
                    std::count(labels.begin(), labels.end(), 0) >= 2;
  if (both) {
    BoundaryMethod method = BoundaryMethod::Logistic;
    if (a.method == "svm" ||
        (a.method == "auto" &&
         std::find(classes.begin(), classes.end(), PlotClass::Jailbreak) != classes.end())) {
      method = BoundaryMethod::LinearSvm;
    }
    boundary = fit_boundary(points, labels, method);
  }

  auto os = open_out(a.out);
  emit_plot_data(points, classes, boundary, os);
  close_out(os, a.out);

  out << "projected " << points.size() << " records; explained variance "
      << fmt(model.explained_variance[0]) << ", " << fmt(model.explained_variance[1]) << "\n";
  if (boundary) {
    out << (boundary->method == BoundaryMethod::LinearSvm ? "svm" : "logistic")
        << " boundary accuracy " << fmt(boundary->training_accuracy) << "\n";
  }
  return kOk;
}

int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::Usage: return kUsage;
    case ErrorKind::Data: return kDataError;
    case ErrorKind::Numeric: return kNumericError;
  }
  return kDataError;
}

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hidden-state filter toolkit: train and evaluate harmful-query filters on "
               "LLM hidden states"};
  app.name("hsf");
  app.require_subcommand(1);

  std::function<int()> action;

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Write a synthetic HSF1 dataset from a preset");
  s->add_option("--preset", synth.preset,
                "aligned-separable | unaligned-overlapping | jailbreak-triad")
      ->required();
  s->add_option("--seed", synth.seed, kSeedHelp)->capture_default_str();
  s->add_option("--out", synth.out, "Output dataset path")->required();
  s->add_option("--format", synth.format, "binary | debug")
      ->check(CLI::IsMember({"binary", "debug"}))
      ->capture_default_str();
  s->callback([&] { action = [&] { return cmd_synth(synth, out); }; });

  ConvertArgs convert;
  auto* c = app.add_subcommand("convert", "Convert a dataset between binary and debug text");
  c->add_option("--data", convert.data, "Input dataset (format auto-detected)")->required();
  c->add_option("--out", convert.out, "Output path")->required();
  c->add_option("--format", convert.format, "binary | debug")
      ->check(CLI::IsMember({"binary", "debug"}))
      ->capture_default_str();
  c->add_option("--seed", convert.seed, "Accepted for uniformity; conversion is deterministic");
  c->callback([&] { action = [&] { return cmd_convert(convert, out); }; });

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a filter on the last-k hidden-state features");
  t->add_option("--data", tr.data, "Training dataset")->required();
  t->add_option("--k", tr.k, "Number of trailing tokens")
      ->check(CLI::Range(kMinTokens, kMaxTokens))
      ->capture_default_str();
  t->add_option("--out", tr.out, "Output params (HSFW) path")->required();
  t->add_option("--history", tr.history, "Optional per-epoch CSV");
  t->add_option("--seed", tr.seed, kSeedHelp)->capture_default_str();
  t->add_option("--train-fraction", tr.train_fraction, "Stratified train share")
      ->check(CLI::Range(0.01, 0.99))
      ->capture_default_str();
  add_train_flags(t, tr.flags);
  t->callback([&] { action = [&] { return cmd_train(tr, out); }; });

  FilterArgs fl;
  auto* f = app.add_subcommand("filter", "Score records and write allow/block verdicts");
  f->add_option("--params", fl.params, "Trained params (HSFW)")->required();
  f->add_option("--data", fl.data, "Dataset to screen")->required();
  f->add_option("--beta", fl.beta, "Block when score exceeds beta")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  f->add_option("--out", fl.out, "Output verdict JSONL")->required();
  f->add_option("--seed", fl.seed, "Accepted for uniformity; scoring is deterministic");
  f->callback([&] { action = [&] { return cmd_filter(fl, out); }; });

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Compute ASR, AUC and FPR for trained params");
  e->add_option("--params", ev.params, "Trained params (HSFW)")->required();
  e->add_option("--data", ev.data, "Evaluation dataset")->required();
  e->add_option("--verdicts", ev.verdicts, "Judge verdict JSONL for harmful records");
  e->add_option("--beta", ev.beta, "Block threshold")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  e->add_option("--out", ev.out, "Report path")->required();
  e->add_option("--format", ev.format, "md | csv")
      ->check(CLI::IsMember({"md", "csv"}))
      ->capture_default_str();
  e->add_option("--roc", ev.roc, "Optional ROC curve CSV");
  e->add_option("--model-tag", ev.model_tag, "Label stored in the report");
  e->add_option("--seed", ev.seed, "Accepted for uniformity; evaluation is deterministic");
  e->callback([&] { action = [&] { return cmd_eval(ev, out); }; });

  AblateArgs ab;
  auto* a = app.add_subcommand("ablate", "Train and evaluate one filter per k");
  a->add_option("--data", ab.data, "Dataset (split 60/20/20 train/val/test)")->required();
  a->add_option("--k", ab.k, "k values: 7, 1..8 or 1,3,5")->capture_default_str();
  a->add_option("--out", ab.out, "Report path")->required();
  a->add_option("--format", ab.format, "md | csv")
      ->check(CLI::IsMember({"md", "csv"}))
      ->capture_default_str();
  a->add_option("--beta", ab.beta, "Block threshold")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  a->add_option("--model-tag", ab.model_tag, "Label stored in the report");
  a->add_option("--threads", ab.threads, "Parallel trainings (0 = hardware)");
  a->add_option("--seed", ab.seed, kSeedHelp)->capture_default_str();
  add_train_flags(a, ab.flags);
  a->callback([&] { action = [&] { return cmd_ablate(ab, out); }; });

  PcaArgs pc;
  auto* p = app.add_subcommand("pca", "Project last-token states to 2-D and fit a boundary");
  p->add_option("--data", pc.data, "Dataset")->required();
  p->add_option("--out", pc.out, "Plot CSV path")->required();
  p->add_option("--classes", pc.classes, "Classes to include")
      ->delimiter(',')
      ->check(CLI::IsMember({"benign", "harmful", "jailbreak"}))
      ->capture_default_str();
  p->add_option("--jailbreak-tag", pc.jailbreak_tags,
                "Source tags of harmful records plotted as jailbreak")
      ->delimiter(',')
      ->capture_default_str();
  p->add_option("--method", pc.method, "auto | logistic | svm")
      ->check(CLI::IsMember({"auto", "logistic", "svm"}))
      ->capture_default_str();
  p->add_option("--seed", pc.seed, "Accepted for uniformity; PCA is deterministic");
  p->callback([&] { action = [&] { return cmd_pca(pc, out); }; });

  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.emplace_back("hsf");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& arg : storage) argv.push_back(arg.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n";
    return kUsage;
  }

  try {
    if (fl.beta <= 0.0 || fl.beta >= 1.0 || ev.beta <= 0.0 || ev.beta >= 1.0 ||
        ab.beta <= 0.0 || ab.beta >= 1.0) {
      throw RangeError("--beta must lie strictly between 0 and 1");
    }
    return action ? action() : kUsage;
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return exit_code(ex);
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kDataError;
  }
}

}  // namespace hsf::cli
