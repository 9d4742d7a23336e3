#include "cli/commands.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>

#include "ctxslu/error.hpp"
#include "ctxslu/model/checkpoint.hpp"
#include "ctxslu/train/stats.hpp"

namespace ctxslu::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::string fixed(double v, int digits) {
  char b[64];
  std::snprintf(b, sizeof b, "%.*f", digits, v);
  return b;
}

json score_json(const train::F1Score& s) {
  return json{{"precision", s.precision},
              {"recall", s.recall},
              {"f1", s.f1},
              {"tp", s.counts.tp},
              {"fp", s.counts.fp},
              {"fn", s.counts.fn}};
}

std::string required(const Settings& s, std::string_view key) {
  auto v = s.raw(key);
  if (!v || v->empty()) throw UsageError("missing required setting '" + std::string(key) + "'");
  return *v;
}

/// Loads the checkpoint and rejects it when any model key given in the settings
/// disagrees with the stored config.
model::Checkpoint load_checked(const Settings& s) {
  auto ck = model::load_checkpoint(required(s, "checkpoint"));
  model::ModelConfig want = ck.model.config();
  apply_model_keys(s, want);
  if (want != ck.model.config())
    throw DataError("checkpoint config " + ck.model.config().to_json().dump() + " does not match the requested " +
                    want.to_json().dump());
  return ck;
}

std::vector<model::Example> corpus_examples(const Settings& s, const model::Checkpoint& ck,
                                            std::vector<corpus::ContextWindow>* windows = nullptr) {
  const auto dialogues = corpus::load_corpus(required(s, "corpus"));
  auto w = corpus::build_windows(dialogues, ck.model.config().context_length);
  auto ex = model::encode_all(w, ck.vocab, ck.labels);
  if (windows) *windows = std::move(w);
  return ex;
}

/// "all", a window index, or an inclusive range "a-b".
std::pair<std::size_t, std::size_t> selection(const Settings& s, std::size_t n) {
  const auto sel = s.text("select", "all");
  if (sel == "all") return {0, n};
  const auto dash = sel.find('-');
  Settings one;
  one.set("select", sel.substr(0, dash));
  const std::size_t lo = one.count("select", 0);
  std::size_t hi = lo;
  if (dash != std::string::npos) {
    one.set("select", sel.substr(dash + 1));
    hi = one.count("select", 0);
  }
  if (lo > hi || hi >= n)
    throw UsageError("select '" + sel + "' is outside the " + std::to_string(n) + " windows of the corpus");
  return {lo, hi + 1};
}

}  // namespace

void cmd_generate(const Settings& s, const fs::path& out, std::ostream& log) {
  const auto spec = generator_spec(s);
  const auto dialogues = corpus::generate(spec);
  auto file = open_out(out);
  corpus::write_corpus(file, dialogues);

  std::size_t turns = 0;
  std::map<std::string, std::size_t> histogram;
  for (const auto& d : dialogues) {
    turns += d.turns.size();
    for (const auto& t : d.turns)
      for (const auto& l : t.labels) ++histogram[l];
  }
  log << "wrote " << out.string() << ": " << dialogues.size() << " dialogues, " << turns << " turns\n";
  for (const auto& [label, n] : histogram) log << "  " << label << ' ' << n << '\n';
}

void cmd_train(const Settings& s, const fs::path& out_dir, std::ostream& log) {
  const auto cfg = train_config(s);
  const auto splits = load_splits(s);
  log << "train " << splits.train.size() << ", valid " << splits.valid.size() << ", test " << splits.test.size()
      << " dialogues\n";
  auto out = train::train(cfg, splits, [&](const train::EpochLog& e) {
    log << "epoch " << e.epoch << " loss " << fixed(e.train_loss, 6) << " valid_f1 " << fixed(e.valid_f1, 4) << '\n';
  });
  fs::create_directories(out_dir);
  model::save_checkpoint(out_dir / "model.ckpt", out.model, out.vocab, out.labels);
  open_out(out_dir / "result.json") << out.result.to_json().dump(2) << '\n';
  log << "best epoch " << out.result.best_epoch << ", test F1 " << fixed(out.result.test.f1, 4) << '\n';
}

void cmd_eval(const Settings& s, const fs::path& out_dir, std::ostream& log) {
  auto ck = load_checked(s);
  const auto ex = corpus_examples(s, ck);
  const auto score = train::evaluate(ck.model, ex);
  const json j{{"checkpoint", required(s, "checkpoint")},
               {"corpus", required(s, "corpus")},
               {"windows", ex.size()},
               {"score", score_json(score)}};
  open_out(out_dir / "eval.json") << j.dump(2) << '\n';
  log << "precision " << fixed(score.precision, 4) << " recall " << fixed(score.recall, 4) << " f1 "
      << fixed(score.f1, 4) << '\n';
}

std::vector<train::ExperimentRow> ablation_rows(const Settings& s) {
  const auto base = train_config(s);
  std::vector<train::ExperimentRow> rows;
  const auto levels = s.words("grid_levels", {"sentence", "role"});
  const auto grid = s.text("grid", "custom");
  auto add = [&](const attn::AttentionConfig& a) {
    auto cfg = base;
    cfg.model.context = model::ContextModel::attention;
    cfg.model.attention = a;
    rows.push_back({std::string(to_string(a.level)) + ": " + a.row_name(), cfg, false});
  };
  for (const auto& lv : levels) {
    const auto level = attn::parse_level(lv);
    if (grid == "table") {
      for (const auto& a : attn::grid_rows(level, base.model.attention.history_repr)) add(a);
    } else if (grid == "custom") {
      for (const auto& k : s.words("grid_kinds", {"none", "content", "time"}))
        for (const auto& sp : s.words("grid_speaker", {"off"}))
          add({attn::parse_kind(k), level, attn::parse_speaker_indicator(sp), base.model.attention.history_repr});
    } else {
      throw ConfigError("key 'grid': expected table or custom, got '" + grid + "'");
    }
  }
  for (const auto& b : s.words("baselines", {"no_context"})) {
    auto cfg = base;
    cfg.model.context = model::parse_context_model(b);
    if (cfg.model.context == model::ContextModel::attention)
      throw ConfigError("key 'baselines': attention is not a baseline model");
    rows.push_back({b, cfg, true});
  }
  for (const auto& r : rows) {
    try {
      r.cfg.validate();
    } catch (const ConfigError& e) {
      throw ConfigError("row '" + r.name + "': " + e.what());
    }
  }
  return rows;
}

void cmd_ablate(const Settings& s, const fs::path& out_dir, std::ostream& log) {
  const auto rows = ablation_rows(s);
  const auto splits = load_splits(s);
  const auto n_runs = s.count("n_runs", 10);
  const auto threads = train::thread_budget();
  log << rows.size() << " rows x " << n_runs << " runs on " << threads << " threads\n";
  const auto table =
      train::run_experiment(rows, splits, n_runs, threads, [&](const std::string& row, std::uint64_t seed,
                                                              const train::RunResult& r) {
        log << "  " << row << " seed " << seed << " test F1 " << fixed(100.0 * r.test.f1, 2) << '\n';
      });
  fs::create_directories(out_dir);
  auto csv = open_out(out_dir / "ablation.csv");
  table.write_csv(csv);
  auto txt = open_out(out_dir / "ablation.txt");
  table.write_text(txt);
  table.write_text(log);
}

void cmd_inspect_attention(const Settings& s, const fs::path& out_dir, std::ostream& log) {
  auto ck = load_checked(s);
  const auto& cfg = ck.model.config();
  const bool has_weights = (cfg.context == model::ContextModel::attention && cfg.attention.kind != attn::Kind::none) ||
                           cfg.context == model::ContextModel::lstm_attention;
  if (!has_weights) throw UsageError("checkpoint has no attention weights to inspect");

  std::vector<corpus::ContextWindow> windows;
  const auto ex = corpus_examples(s, ck, &windows);
  const auto [lo, hi] = selection(s, ex.size());

  auto rows_out = open_out(out_dir / "attention_weights.csv");
  rows_out << "window,dialogue,turn,distance,role,group,weight\n";
  std::map<std::size_t, std::pair<double, std::size_t>> by_distance;
  ad::Tape tape;
  for (std::size_t i = 0; i < ex.size(); ++i) {
    tape.clear();
    const auto f = ck.model.forward(tape, ex[i]);
    if (ex[i].histories.empty()) continue;
    for (const auto& r : attn::export_weights(f.history)) {
      auto& acc = by_distance[r.distance];
      acc.first += r.weight;
      ++acc.second;
      if (i >= lo && i < hi)
        rows_out << i << ',' << windows[i].dialogue_id << ',' << windows[i].turn_index << ',' << r.distance << ','
                 << to_string(r.role) << ',' << r.group << ',' << fixed(r.weight, 12) << '\n';
    }
  }

  auto mean_out = open_out(out_dir / "attention_by_distance.csv");
  mean_out << "distance,mean_weight,count\n";
  std::vector<double> d, w;
  for (const auto& [dist, acc] : by_distance) {
    const double m = acc.first / static_cast<double>(acc.second);
    mean_out << dist << ',' << fixed(m, 12) << ',' << acc.second << '\n';
    log << "distance " << dist << " mean weight " << fixed(m, 6) << " (" << acc.second << ")\n";
    d.push_back(static_cast<double>(dist));
    w.push_back(m);
  }
  if (d.size() >= 2) log << "spearman(distance, mean weight) " << fixed(train::spearman(d, w), 4) << '\n';
}

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Context-aware spoken language understanding with time-decay attention"};
  app.require_subcommand(1);
  app.footer("Any other setting is passed as --key value (hyphens or underscores). Settings: " + [] {
    std::string keys;
    for (const auto& k : known_keys()) keys += (keys.empty() ? "" : ", ") + k;
    return keys;
  }());

  struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
  };
  std::map<std::string, Common> common;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"generate", "write a synthetic corpus (--out is the corpus file)"},
      {"train", "train one model; writes model.ckpt and result.json"},
      {"eval", "score a checkpoint on a corpus; writes eval.json"},
      {"ablate", "train every row of an ablation grid several times; writes ablation.csv/.txt"},
      {"inspect-attention", "export attention weights of a checkpoint on a corpus"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->allow_extras();
    auto& c = common[name];
    sub->add_option("--config", c.config, "key = value settings file");
    sub->add_option("--seed", c.seed, "random seed");
    sub->add_option("--out", c.out, name == "generate" ? "output corpus file" : "output directory")
        ->default_str(name == "generate" ? "" : "ctxslu-out");
  }

  std::vector<std::string> argv_store(args.begin(), args.end());
  if (argv_store.empty()) argv_store.push_back("ctxslu");
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    const CLI::App* sub = app.get_subcommands().front();
    const auto& name = sub->get_name();
    const auto& c = common[name];
    Settings s;
    if (!c.config.empty()) s.merge_file(c.config);
    s.merge_args(sub->remaining());
    if (c.seed) s.set("seed", std::to_string(*c.seed));
    const fs::path out_dir = c.out.empty() ? fs::path("ctxslu-out") : fs::path(c.out);

    if (name == "generate") {
      if (c.out.empty()) throw UsageError("generate needs --out <corpus file>");
      cmd_generate(s, c.out, out);
    } else if (name == "train") {
      cmd_train(s, out_dir, out);
    } else if (name == "eval") {
      cmd_eval(s, out_dir, out);
    } else if (name == "ablate") {
      cmd_ablate(s, out_dir, out);
    } else {
      cmd_inspect_attention(s, out_dir, out);
    }
    return 0;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace ctxslu::cli
