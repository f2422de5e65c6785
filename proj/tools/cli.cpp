#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "denoise/bmm.hpp"
#include "denoise/checkpoint.hpp"
#include "denoise/data.hpp"
#include "denoise/noise.hpp"
#include "denoise/rng.hpp"
#include "denoise/synth.hpp"
#include "denoise/training.hpp"

namespace fs = std::filesystem;

namespace denoise::cli {

namespace {

/// Error in user-supplied arguments (exit code 1).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string fmt_short(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", x);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
std::vector<T> parse_grid(const std::string& s, const char* name) {
  std::vector<T> out;
  for (const auto& item : split_list(s)) {
    try {
      std::size_t used = 0;
      if constexpr (std::is_same_v<T, double>) {
        out.push_back(std::stod(item, &used));
      } else {
        out.push_back(static_cast<T>(std::stoull(item, &used)));
      }
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError(std::string("invalid value '") + item + "' in " + name);
    }
  }
  if (out.empty()) throw UsageError(std::string(name) + " must list at least one value");
  return out;
}

// ---------------------------------------------------------------------------
// Shared training options

struct TrainArgs {
  std::string train;
  std::string train_format = "tsv";
  std::string valid;
  std::string valid_format = "tsv";
  double valid_fraction = 0.0;
  std::string test;
  std::string test_format = "trec";
  std::string out;
  std::string mode = "dn-hard";
  std::string rep = "logits";
  TrainConfig config;
  std::size_t min_freq = 1;
  std::string embeddings;
  bool audit_poison_clean = false;
};

void add_train_options(CLI::App& cmd, TrainArgs& a, bool with_out) {
  cmd.add_option("--train", a.train, "Training split (noisy labels)")->required();
  cmd.add_option("--train-format", a.train_format, "trec | agnews | tsv");
  cmd.add_option("--valid", a.valid, "Validation split (noisy labels)");
  cmd.add_option("--valid-format", a.valid_format, "trec | agnews | tsv");
  cmd.add_option("--valid-fraction", a.valid_fraction,
                 "Carve validation from train when --valid is absent");
  cmd.add_option("--test", a.test, "Clean test split")->required();
  cmd.add_option("--test-format", a.test_format, "trec | agnews | tsv");
  if (with_out) cmd.add_option("--out", a.out, "Output directory")->required();
  cmd.add_option("--mode", a.mode, "baseline | dn-soft | dn-hard");
  cmd.add_option("--rep", a.rep, "Noise-head input: logits | concat");
  cmd.add_option("--t0", a.config.t0, "Warmup epochs");
  cmd.add_option("--epochs", a.config.epochs, "Total epochs");
  cmd.add_option("--beta", a.config.beta, "Weight of the clean-gated classifier term");
  cmd.add_option("--lr", a.config.lr, "Adam learning rate");
  cmd.add_option("--batch-size", a.config.batch_size);
  cmd.add_option("--dropout", a.config.dropout);
  cmd.add_option("--dim", a.config.dim, "Embedding width");
  cmd.add_option("--hidden", a.config.hidden, "Classifier hidden width");
  cmd.add_option("--seed", a.config.seed);
  cmd.add_option("--eval-every", a.config.eval_every);
  cmd.add_option("--min-freq", a.min_freq);
  cmd.add_option("--embeddings", a.embeddings, "Pretrained vectors, 'token v1 .. vd' per line");
  cmd.add_flag("--audit-poison-clean", a.audit_poison_clean,
               "Replace clean labels in train/valid with a sentinel before training")
      ->group("");
}

void finalize(TrainArgs& a) {
  try {
    a.config.mode = parse_train_mode(a.mode);
    a.config.rep_mode = parse_rep_mode(a.rep);
    parse_data_format(a.train_format);
    parse_data_format(a.valid_format);
    parse_data_format(a.test_format);
    a.config.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (a.valid.empty() && !(a.valid_fraction > 0.0 && a.valid_fraction < 1.0)) {
    throw UsageError("either --valid or --valid-fraction in (0, 1) is required");
  }
}

// Keys that do not influence training results.
bool affects_results(const std::string& key) {
  return key != "out" && key != "audit_poison_clean";
}

std::vector<std::pair<std::string, std::string>> resolved_entries(const TrainArgs& a) {
  const auto& c = a.config;
  std::vector<std::pair<std::string, std::string>> kv = {
      {"train", a.train},
      {"train_format", a.train_format},
      {"valid", a.valid},
      {"valid_format", a.valid_format},
      {"valid_fraction", fmt(a.valid_fraction)},
      {"test", a.test},
      {"test_format", a.test_format},
      {"out", a.out},
      {"mode", std::string(to_string(c.mode))},
      {"rep", std::string(to_string(c.rep_mode))},
      {"t0", std::to_string(c.t0)},
      {"epochs", std::to_string(c.epochs)},
      {"beta", fmt(c.beta)},
      {"lr", fmt(c.lr)},
      {"batch_size", std::to_string(c.batch_size)},
      {"dropout", fmt(c.dropout)},
      {"dim", std::to_string(c.dim)},
      {"hidden", std::to_string(c.hidden)},
      {"seed", std::to_string(c.seed)},
      {"eval_every", std::to_string(c.eval_every)},
      {"min_freq", std::to_string(a.min_freq)},
      {"embeddings", a.embeddings},
      {"audit_poison_clean", a.audit_poison_clean ? "true" : "false"},
  };
  // Empty values cannot be expressed as flags; leave them out.
  std::erase_if(kv, [](const auto& e) { return e.second.empty(); });
  return kv;
}

std::string resolved_config_text(const TrainArgs& a) {
  std::string out = "# effective configuration; pass back with --config to reproduce\n";
  for (const auto& [k, v] : resolved_entries(a)) out += k + " = " + v + "\n";
  return out;
}

std::uint64_t config_hash(const TrainArgs& a) {
  std::string text;
  for (const auto& [k, v] : resolved_entries(a)) {
    if (affects_results(k)) text += k + "=" + v + "\n";
  }
  return hash_tag(text);
}

ExperimentData load_experiment_data(const TrainArgs& a) {
  Dataset train = load_dataset(a.train, parse_data_format(a.train_format));
  Dataset valid;
  if (!a.valid.empty()) {
    valid = load_dataset(a.valid, parse_data_format(a.valid_format));
  } else {
    auto parts = split_validation(train, a.valid_fraction, derive_seed(a.config.seed, {hash_tag("valid-split")}));
    train = std::move(parts.train);
    valid = std::move(parts.validation);
  }
  Dataset test = load_dataset(a.test, parse_data_format(a.test_format));
  auto data = prepare_data(std::move(train), std::move(valid), std::move(test), a.min_freq);
  if (a.audit_poison_clean) poison_clean_labels(data);
  return data;
}

void remove_outputs(const fs::path& dir) {
  std::error_code ec;
  for (const auto& name : experiment_output_files()) fs::remove(dir / name, ec);
  fs::remove(dir / "resolved_config", ec);
}

MetricsReport train_into(const TrainArgs& a, const ExperimentData& data) {
  const fs::path out(a.out);
  try {
    fs::create_directories(out);
    write_text(out / "resolved_config", resolved_config_text(a));
    ExperimentOptions opts;
    opts.config_hash = config_hash(a);
    if (!a.embeddings.empty()) opts.embeddings_path = a.embeddings;
    auto result = run_experiment(a.config, data, out, opts);
    for (const auto& name : experiment_output_files()) {
      if (!fs::exists(out / name)) throw std::runtime_error("missing output " + name);
    }
    return result.report;
  } catch (...) {
    remove_outputs(out);
    throw;
  }
}

// ---------------------------------------------------------------------------
// Commands

struct InjectArgs {
  std::string input, format = "trec", output, report, valid_output;
  std::string noise = "random", tokens, match;
  double level = 0.0, valid_fraction = 0.0;
  std::uint64_t seed = 1;
};

bool is_question_word(const std::string& t) {
  static const std::set<std::string> words = {"How", "What", "Who", "Where", "When", "Why", "Which"};
  return words.contains(t);
}

void cmd_inject(CLI::App& cmd, InjectArgs& a) {
  cmd.add_option("--input", a.input, "Dataset to corrupt")->required();
  cmd.add_option("--format", a.format, "trec | agnews | tsv");
  cmd.add_option("--output", a.output, "Noisy TSV to write")->required();
  cmd.add_option("--report", a.report, "Report JSON (default: noise_report.json next to --output)");
  cmd.add_option("--noise", a.noise, "random | token | length");
  cmd.add_option("--level", a.level, "Noise fraction (of eligible samples)");
  cmd.add_option("--tokens", a.tokens, "Comma-separated trigger tokens for --noise token");
  cmd.add_option("--match", a.match, "contains | starts_with");
  cmd.add_option("--seed", a.seed);
  cmd.add_option("--valid-fraction", a.valid_fraction, "Also carve and corrupt a validation split");
  cmd.add_option("--valid-output", a.valid_output, "Where the validation TSV goes");

  cmd.callback([&] {
    NoiseSpec spec;
    try {
      spec.kind = parse_noise_kind(a.noise);
      spec.level = a.level;
      spec.trigger_tokens = split_list(a.tokens);
      if (!a.match.empty()) {
        spec.match_mode = parse_match_mode(a.match);
      } else if (!spec.trigger_tokens.empty() &&
                 std::all_of(spec.trigger_tokens.begin(), spec.trigger_tokens.end(), is_question_word)) {
        spec.match_mode = MatchMode::kStartsWith;
      } else {
        spec.match_mode = MatchMode::kContains;
      }
      spec.seed = a.seed;
      spec.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    if ((a.valid_fraction > 0.0) != !a.valid_output.empty()) {
      throw UsageError("--valid-fraction and --valid-output must be given together");
    }

    Dataset data = load_dataset(a.input, parse_data_format(a.format));
    Dataset valid;
    if (!a.valid_output.empty()) {
      auto parts = split_validation(data, a.valid_fraction, derive_seed(a.seed, {hash_tag("valid-split")}));
      data = std::move(parts.train);
      valid = std::move(parts.validation);
    }
    auto noisy = inject_noise(data, spec);
    const fs::path out(a.output);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_noisy_dataset(noisy.dataset, out);

    nlohmann::ordered_json report;
    report["noise"] = std::string(to_string(spec.kind));
    report["level"] = spec.level;
    report["seed"] = spec.seed;
    if (spec.kind == NoiseKind::kTokenConditional) {
      report["tokens"] = spec.trigger_tokens;
      report["match"] = std::string(to_string(spec.match_mode));
    }
    report["train"] = nlohmann::ordered_json::parse(noisy.report.to_json());
    if (!a.valid_output.empty()) {
      NoiseSpec vspec = spec;
      vspec.seed = derive_seed(spec.seed, {hash_tag("validation-noise")});
      auto vnoisy = inject_noise(valid, vspec);
      write_noisy_dataset(vnoisy.dataset, a.valid_output);
      report["validation"] = nlohmann::ordered_json::parse(vnoisy.report.to_json());
    }
    const fs::path report_path =
        a.report.empty() ? out.parent_path() / "noise_report.json" : fs::path(a.report);
    write_text(report_path, report.dump(2) + "\n");
    std::cout << "flipped " << noisy.report.flipped_count << " of " << noisy.report.total_count
              << " (eligible " << noisy.report.eligible_count << ", realized "
              << fmt_short(noisy.report.realized_noise_fraction) << ")\n";
  });
}

void cmd_train(CLI::App& cmd, TrainArgs& a) {
  add_train_options(cmd, a, true);
  cmd.callback([&] {
    finalize(a);
    const auto data = load_experiment_data(a);
    const auto report = train_into(a, data);
    std::cout << "best=" << fmt_short(report.best_test_accuracy)
              << " last=" << fmt_short(report.last_test_accuracy) << " gap=" << fmt_short(report.gap)
              << "\n";
  });
}

struct FitArgs {
  std::string losses, out;
};

void cmd_fit_bmm(CLI::App& cmd, FitArgs& a) {
  cmd.add_option("--losses", a.losses, "CSV with id,raw_loss columns")->required();
  cmd.add_option("--out", a.out, "Output directory")->required();
  cmd.callback([&] {
    std::ifstream in(a.losses);
    if (!in) throw std::runtime_error("cannot open " + a.losses);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(a.losses + ": empty file");
    const auto header = split_list(line);
    const auto id_col = std::find(header.begin(), header.end(), "id") - header.begin();
    const auto loss_col = std::find(header.begin(), header.end(), "raw_loss") - header.begin();
    if (id_col == static_cast<std::ptrdiff_t>(header.size()) ||
        loss_col == static_cast<std::ptrdiff_t>(header.size())) {
      throw std::runtime_error(a.losses + ": header must contain id and raw_loss");
    }
    std::vector<std::string> ids;
    std::vector<double> raw;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      std::vector<std::string> cells;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
      if (cells.size() < header.size()) {
        throw std::runtime_error(a.losses + ": line " + std::to_string(line_no) + ": too few columns");
      }
      try {
        raw.push_back(std::stod(cells[static_cast<std::size_t>(loss_col)]));
      } catch (const std::exception&) {
        throw std::runtime_error(a.losses + ": line " + std::to_string(line_no) + ": bad raw_loss");
      }
      ids.push_back(cells[static_cast<std::size_t>(id_col)]);
    }
    if (raw.size() < 10) {
      throw std::runtime_error("need at least 10 loss rows to fit a beta mixture, found " +
                               std::to_string(raw.size()));
    }
    const auto normalized = normalize_losses(raw);
    if (normalized.degenerate) {
      throw std::runtime_error("all losses are identical: a two-component mixture cannot be fitted "
                               "(training falls back to clean weight 1.0 in this case)");
    }
    const auto mixture = fit_bmm(normalized.values);
    const fs::path out(a.out);
    fs::create_directories(out);
    write_text(out / "bmm.json", mixture.to_json());
    std::string csv = "id,raw_loss,normalized_loss,posterior\n";
    for (std::size_t i = 0; i < raw.size(); ++i) {
      csv += ids[i] + "," + fmt(raw[i]) + "," + fmt(normalized.values[i]) + "," +
             fmt(posterior_clean(mixture, normalized.values[i])) + "\n";
    }
    write_text(out / "scored.csv", csv);
    std::cout << "lambda_c=" << fmt_short(mixture.lambda_c) << " clean_mean=" << fmt_short(mixture.clean_mean())
              << " noisy_mean=" << fmt_short(mixture.noisy_mean()) << " iterations=" << mixture.iterations_run
              << "\n";
  });
}

struct EvalArgs {
  std::string checkpoint, vocab, data, format = "trec", labels = "clean";
};

void cmd_eval(CLI::App& cmd, EvalArgs& a) {
  cmd.add_option("--checkpoint", a.checkpoint)->required();
  cmd.add_option("--vocab", a.vocab, "vocab.txt written by train")->required();
  cmd.add_option("--data", a.data)->required();
  cmd.add_option("--format", a.format, "trec | agnews | tsv");
  cmd.add_option("--labels", a.labels, "Label column to score against: clean | noisy");
  cmd.callback([&] {
    if (a.labels != "clean" && a.labels != "noisy") throw UsageError("--labels must be clean or noisy");
    const auto ckpt = load_checkpoint(a.checkpoint);
    std::vector<std::string> tokens;
    {
      std::ifstream in(a.vocab);
      if (!in) throw std::runtime_error("cannot open " + a.vocab);
      std::string tok;
      while (std::getline(in, tok)) tokens.push_back(tok);
    }
    Dataset ds = load_dataset(a.data, parse_data_format(a.format));
    std::unordered_map<std::string, std::int32_t> index;
    for (std::size_t i = 0; i < tokens.size(); ++i) index.emplace(tokens[i], static_cast<std::int32_t>(i));
    if (tokens.size() != ckpt.classifier.vocab_size()) {
      throw std::runtime_error("vocabulary size does not match the checkpoint");
    }
    for (auto& ex : ds.examples) {
      ex.tokens.clear();
      for (const auto& t : tokenize(ex.text)) {
        auto it = index.find(t);
        ex.tokens.push_back(it == index.end() ? kUnkId : it->second);
      }
    }
    const double acc = evaluate(ckpt.classifier, ds, a.labels == "clean" ? LabelColumn::kClean : LabelColumn::kNoisy);
    std::cout << "accuracy=" << fmt_short(acc) << " n=" << ds.size() << "\n";
  });
}

struct SweepArgs {
  TrainArgs train;
  std::string grid_t0 = "6,10,20";
  std::string grid_beta = "2,4,6,8,10";
  std::size_t jobs = 1;
};

void cmd_sweep(CLI::App& cmd, SweepArgs& sa) {
  TrainArgs& a = sa.train;
  add_train_options(cmd, a, true);
  cmd.add_option("--grid-t0", sa.grid_t0, "Warmup epochs to try");
  cmd.add_option("--grid-beta", sa.grid_beta, "Beta values to try");
  cmd.add_option("--jobs", sa.jobs, "Cells trained concurrently");
  cmd.callback([&] {
    const auto t0s = parse_grid<std::size_t>(sa.grid_t0, "--grid-t0");
    const auto betas = parse_grid<double>(sa.grid_beta, "--grid-beta");
    a.config.t0 = *std::min_element(t0s.begin(), t0s.end());
    a.config.beta = *std::max_element(betas.begin(), betas.end());
    finalize(a);
    const std::size_t jobs = sa.jobs;
    if (jobs < 1) throw UsageError("--jobs must be at least 1");
    const auto data = load_experiment_data(a);

    struct Cell {
      std::size_t t0;
      double beta;
      std::uint64_t seed;
      std::string dir;
      bool ok = false;
      std::string error;
      MetricsReport report;
    };
    std::vector<Cell> cells;
    for (std::size_t t0 : t0s) {
      for (double beta : betas) {
        Cell c{t0, beta, sweep_cell_seed(a.config.seed, t0, beta), "", false, "", {}};
        c.dir = "t0_" + std::to_string(t0) + "_beta_" + fmt(beta);
        cells.push_back(std::move(c));
      }
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < cells.size(); i = next++) {
        Cell& cell = cells[i];
        TrainArgs cell_args = a;
        cell_args.config.t0 = cell.t0;
        cell_args.config.beta = cell.beta;
        cell_args.config.seed = cell.seed;
        cell_args.out = (fs::path(a.out) / cell.dir).string();
        try {
          cell_args.config.validate();
          cell.report = train_into(cell_args, data);
          cell.ok = true;
        } catch (const std::exception& e) {
          cell.error = e.what();
        }
      }
    };
    std::vector<std::thread> pool;
    for (std::size_t j = 1; j < std::min(jobs, cells.size()); ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::ptrdiff_t selected = -1;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (!cells[i].ok) continue;
      if (selected < 0 ||
          cells[i].report.best_valid_accuracy > cells[static_cast<std::size_t>(selected)].report.best_valid_accuracy) {
        selected = static_cast<std::ptrdiff_t>(i);
      }
    }
    std::string csv = "t0,beta,seed,status,best_epoch,best_valid,best,last,gap,selected\n";
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto& c = cells[i];
      csv += std::to_string(c.t0) + "," + fmt(c.beta) + "," + std::to_string(c.seed) + ",";
      if (c.ok) {
        csv += "ok," + std::to_string(c.report.best_epoch) + "," + fmt(c.report.best_valid_accuracy) + "," +
               fmt(c.report.best_test_accuracy) + "," + fmt(c.report.last_test_accuracy) + "," +
               fmt(c.report.gap);
      } else {
        std::string err = c.error;
        std::replace(err.begin(), err.end(), ',', ';');
        std::replace(err.begin(), err.end(), '\n', ' ');
        csv += "failed: " + err + ",,,,,";
      }
      csv += std::string(",") + (static_cast<std::ptrdiff_t>(i) == selected ? "1" : "0") + "\n";
    }
    fs::create_directories(a.out);
    write_text(fs::path(a.out) / "sweep_summary.csv", csv);
    if (selected < 0) throw std::runtime_error("every sweep cell failed");
    const auto& s = cells[static_cast<std::size_t>(selected)];
    std::cout << "selected t0=" << s.t0 << " beta=" << fmt_short(s.beta) << " best=" << fmt_short(s.report.best_test_accuracy)
              << " last=" << fmt_short(s.report.last_test_accuracy) << " gap=" << fmt_short(s.report.gap) << "\n";
  });
}

struct SynthArgs {
  SynthOptions opts;
  std::string output;
};

void cmd_synth(CLI::App& cmd, SynthArgs& sa) {
  SynthOptions& opts = sa.opts;
  std::string& output = sa.output;
  cmd.add_option("--output", output, "TREC-format file to write")->required();
  cmd.add_option("--count", opts.count, "Number of questions");
  cmd.add_option("--seed", opts.seed);
  cmd.add_option("--name-pool", opts.name_pool, "Distinct rare name tokens");
  cmd.add_option("--pool-seed", opts.pool_seed, "Seed of the name pool (keep equal across splits)");
  cmd.callback([&] {
    const fs::path out(output);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_text(out, make_question_corpus(opts));
  });
}

}  // namespace

std::map<std::string, std::string> parse_flat_config(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(ss, line)) {
    ++n;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(n) + ": expected key = value");
    }
    std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw std::invalid_argument("config line " + std::to_string(n) + ": empty key");
    std::replace(key.begin(), key.end(), '-', '_');
    kv[key] = value;
  }
  return kv;
}

std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> rest;
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file argument");
      config_path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (config_path.empty()) return rest;

  std::map<std::string, std::string> kv;
  try {
    kv = parse_flat_config(read_file(config_path));
  } catch (const std::invalid_argument& e) {
    throw UsageError(config_path + ": " + e.what());
  }
  std::vector<std::string> out;
  // The subcommand name stays first.
  if (!rest.empty()) out.push_back(rest.front());
  for (const auto& [key, value] : kv) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    out.push_back(flag + "=" + value);
  }
  out.insert(out.end(), rest.begin() + (rest.empty() ? 0 : 1), rest.end());
  return out;
}

std::uint64_t sweep_cell_seed(std::uint64_t master, std::size_t t0, double beta) {
  return derive_seed(master, {static_cast<std::uint64_t>(t0), std::bit_cast<std::uint64_t>(beta)});
}

int run(const std::vector<std::string>& raw_args) {
  CLI::App app{"Label-noise robust text classification with a beta-mixture gated de-noising loss"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  InjectArgs inject_args;
  TrainArgs train_args;
  FitArgs fit_args;
  EvalArgs eval_args;
  SweepArgs sweep_args;
  SynthArgs synth_args;
  cmd_inject(*app.add_subcommand("inject", "Corrupt labels and write the noisy TSV"), inject_args);
  cmd_train(*app.add_subcommand("train", "Warmup, fit the mixture, train with the chosen objective"),
            train_args);
  cmd_fit_bmm(*app.add_subcommand("fit-bmm", "Fit the two-component beta mixture to a loss CSV"),
              fit_args);
  cmd_eval(*app.add_subcommand("eval", "Accuracy of a checkpoint on a dataset"), eval_args);
  cmd_sweep(*app.add_subcommand("sweep", "Grid over warmup epochs and beta"), sweep_args);
  cmd_synth(*app.add_subcommand("synth", "Write a synthetic TREC-format question corpus"), synth_args);

  try {
    std::vector<std::string> args = expand_config(raw_args);
    std::reverse(args.begin(), args.end());  // CLI11 consumes from the back
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kOk;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace denoise::cli
