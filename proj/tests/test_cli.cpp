#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli/commands.hpp"
#include "cli/settings.hpp"
#include "ctxslu/error.hpp"

using namespace ctxslu;
using namespace ctxslu::cli;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "ctxslu");
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Workspace {
  fs::path dir;
  explicit Workspace(const std::string& name) : dir(fs::temp_directory_path() / ("ctxslu_cli_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string operator/(const std::string& f) const { return (dir / f).string(); }
};

const std::vector<std::string> kSmallModel{"--word-dim", "8", "--dim", "8", "--batch-size", "16"};

std::vector<std::string> operator+(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

void generate_small(const Workspace& ws, const std::string& name = "c.jsonl") {
  REQUIRE(invoke({"generate", "--out", ws / name, "--n-dialogues", "16", "--turns-per-dialogue", "8", "--label-count",
               "3", "--vocab-size", "12"})
              .code == 0);
}

}  // namespace

TEST_CASE("settings precedence is defaults, then file, then command line") {
  Settings s;
  std::istringstream file("# comment\ndim = 64\nword-dim=32\n\nlr = 0.01\n");
  s.merge(file);
  const std::vector<std::string> args{"--dim", "16", "--speaker-indicator=both"};
  s.merge_args(args);
  const auto cfg = train_config(s);
  CHECK(cfg.model.dim == 16);
  CHECK(cfg.model.word_dim == 32);
  CHECK(cfg.adam.lr == 0.01);
  CHECK(cfg.model.attention.speaker_indicator == attn::SpeakerIndicator::both);
  CHECK(cfg.batch_size == 256);
  CHECK(cfg.model.context_length == 7);
}

TEST_CASE("settings reject malformed input") {
  Settings s;
  std::istringstream no_eq("dim = 4\njust words\n");
  try {
    s.merge(no_eq);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(s.set("colour", "red"), ConfigError);
  s.set("dim", "four");
  CHECK_THROWS_AS(train_config(s), ConfigError);
  s.set("dim", "-3");
  CHECK_THROWS_AS(train_config(s), ConfigError);
  const std::vector<std::string> dangling{"--dim"};
  CHECK_THROWS_AS(s.merge_args(dangling), UsageError);
  const std::vector<std::string> bare{"dim"};
  CHECK_THROWS_AS(s.merge_args(bare), UsageError);
}

TEST_CASE("generator settings") {
  Settings s;
  s.set("decay-profile", "1, 0, 0");
  s.set("scheme", "act_reference");
  s.set("seed", "9");
  const auto g = generator_spec(s);
  CHECK(g.decay_profile == std::vector<double>{1.0, 0.0, 0.0});
  CHECK(g.scheme == corpus::LabelScheme::act_reference);
  CHECK(g.seed == 9);
}

TEST_CASE("generate writes one line per dialogue and is repeatable") {
  Workspace ws("generate");
  const auto r = invoke({"generate", "--out", ws / "a.jsonl", "--n-dialogues", "7", "--seed", "4"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("7 dialogues") != std::string::npos);
  const auto text = slurp(ws / "a.jsonl");
  CHECK(std::count(text.begin(), text.end(), '\n') == 7);
  REQUIRE(invoke({"generate", "--out", ws / "b.jsonl", "--n-dialogues", "7", "--seed", "4"}).code == 0);
  CHECK(slurp(ws / "b.jsonl") == text);

  CHECK(invoke({"generate", "--out", ws / "c.jsonl", "--decay-profile", "0.6,0.6"}).code == 2);
  CHECK(invoke({"generate"}).code == 2);
}

TEST_CASE("the config file is read and overridden by flags") {
  Workspace ws("config");
  std::ofstream(ws / "gen.cfg") << "n_dialogues = 3\nturns_per_dialogue = 4\n";
  REQUIRE(invoke({"generate", "--config", ws / "gen.cfg", "--out", ws / "a.jsonl", "--n-dialogues", "5"}).code == 0);
  CHECK(corpus::load_corpus(ws / "a.jsonl").size() == 5);
  CHECK(corpus::load_corpus(ws / "a.jsonl")[0].turns.size() == 4);
  CHECK(invoke({"generate", "--config", ws / "missing.cfg", "--out", ws / "b.jsonl"}).code == 2);
}

TEST_CASE("train writes a checkpoint and a result that echoes the config") {
  Workspace ws("train");
  generate_small(ws);
  const auto args = std::vector<std::string>{"train", "--corpus", ws / "c.jsonl", "--max-epochs", "3", "--attention",
                                             "time", "--level", "role", "--speaker-indicator", "both"} +
                    kSmallModel;
  REQUIRE(invoke(args + std::vector<std::string>{"--out", ws / "run"}).code == 0);
  CHECK(fs::exists(ws / "run/model.ckpt"));
  const auto result = nlohmann::json::parse(slurp(ws / "run/result.json"));
  CHECK(result["config"]["model"]["attention"]["kind"] == "time");
  CHECK(result["config"]["model"]["attention"]["level"] == "role");
  CHECK(result["config"]["model"]["attention"]["speaker_indicator"] == "both");

  REQUIRE(invoke(args + std::vector<std::string>{"--out", ws / "again"}).code == 0);
  CHECK(slurp(ws / "again/result.json") == slurp(ws / "run/result.json"));
  CHECK(slurp(ws / "again/model.ckpt") == slurp(ws / "run/model.ckpt"));

  CHECK(invoke({"train", "--corpus", ws / "absent.jsonl", "--out", ws / "x"}).code == 2);
  CHECK(invoke({"train", "--out", ws / "x"}).code == 2);
}

TEST_CASE("eval is repeatable and rejects damaged or mismatched checkpoints") {
  Workspace ws("eval");
  generate_small(ws);
  const std::vector<std::string> tr{"train", "--corpus", ws / "c.jsonl", "--max-epochs", "2", "--out", ws / "run"};
  REQUIRE(invoke(tr + kSmallModel).code == 0);
  const std::vector<std::string> ev{"eval", "--checkpoint", ws / "run/model.ckpt", "--corpus", ws / "c.jsonl"};
  const auto a = invoke(ev + std::vector<std::string>{"--out", ws / "e1"});
  const auto b = invoke(ev + std::vector<std::string>{"--out", ws / "e2"});
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out.find("f1") != std::string::npos);
  const auto j1 = nlohmann::json::parse(slurp(ws / "e1/eval.json"));
  const auto j2 = nlohmann::json::parse(slurp(ws / "e2/eval.json"));
  CHECK(j1["score"] == j2["score"]);

  CHECK(invoke(ev + std::vector<std::string>{"--dim", "16", "--out", ws / "e3"}).code == 2);

  const auto full = slurp(ws / "run/model.ckpt");
  std::ofstream(ws / "cut.ckpt", std::ios::binary) << full.substr(0, full.size() / 2);
  const auto cut = invoke({"eval", "--checkpoint", ws / "cut.ckpt", "--corpus", ws / "c.jsonl", "--out", ws / "e4"});
  CHECK(cut.code == 2);
  CHECK(!cut.err.empty());
}

TEST_CASE("eval after overfitting the training data reaches F1 0.99") {
  Workspace ws("overfit");
  REQUIRE(invoke({"generate", "--out", ws / "c.jsonl", "--n-dialogues", "2", "--turns-per-dialogue", "10",
               "--label-count", "3", "--vocab-size", "9", "--decay-profile", "0.5,0.25"})
              .code == 0);
  REQUIRE(invoke({"train", "--train-corpus", ws / "c.jsonl", "--valid-corpus", ws / "c.jsonl", "--word-dim", "16",
               "--dim", "16", "--batch-size", "4", "--lr", "0.01", "--max-epochs", "30", "--patience", "30", "--out",
               ws / "run"})
              .code == 0);
  REQUIRE(invoke({"eval", "--checkpoint", ws / "run/model.ckpt", "--corpus", ws / "c.jsonl", "--out", ws / "e"}).code ==
          0);
  CHECK(nlohmann::json::parse(slurp(ws / "e/eval.json"))["score"]["f1"].get<double>() >= 0.99);
}

TEST_CASE("ablate builds the grid and writes both tables") {
  Workspace ws("ablate");
  generate_small(ws);
  Settings s;
  s.set("corpus", ws / "c.jsonl");
  s.set("baselines", "");
  CHECK(ablation_rows(s).size() == 6);
  s.set("grid", "table");
  s.set("grid_levels", "role");
  CHECK(ablation_rows(s).size() == 11);
  s.set("grid", "custom");
  s.set("grid_kinds", "none");
  s.set("grid_speaker", "both");
  CHECK_THROWS_WITH_AS(ablation_rows(s), doctest::Contains("row 'role:"), ConfigError);

  const auto r = invoke(std::vector<std::string>{"ablate", "--corpus", ws / "c.jsonl", "--n-runs", "2", "--max-epochs",
                                              "1", "--grid-kinds", "none,time", "--grid-levels", "role", "--out",
                                              ws / "abl"} +
                     kSmallModel);
  REQUIRE(r.code == 0);
  const auto csv = slurp(ws / "abl/ablation.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(csv.find("no_context") != std::string::npos);
  CHECK(fs::exists(ws / "abl/ablation.txt"));

  CHECK(invoke({"ablate", "--corpus", ws / "c.jsonl", "--grid-kinds", "none", "--grid-speaker", "both", "--out",
             ws / "bad"})
            .code == 2);
}

TEST_CASE("inspect-attention exports weights that sum to one per group") {
  Workspace ws("inspect");
  generate_small(ws);
  REQUIRE(invoke(std::vector<std::string>{"train", "--corpus", ws / "c.jsonl", "--max-epochs", "1", "--level",
                                       "sentence", "--out", ws / "run"} +
              kSmallModel)
              .code == 0);
  const std::vector<std::string> base{"inspect-attention", "--checkpoint", ws / "run/model.ckpt", "--corpus",
                                      ws / "c.jsonl"};
  const auto r = invoke(base + std::vector<std::string>{"--select", "5", "--out", ws / "i"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("spearman") != std::string::npos);
  std::istringstream rows(slurp(ws / "i/attention_weights.csv"));
  std::string line;
  std::getline(rows, line);
  CHECK(line == "window,dialogue,turn,distance,role,group,weight");
  double total = 0.0;
  std::size_t n = 0;
  while (std::getline(rows, line)) {
    total += std::stod(line.substr(line.rfind(',') + 1));
    ++n;
  }
  CHECK(n == 5);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(fs::exists(ws / "i/attention_by_distance.csv"));

  CHECK(invoke(base + std::vector<std::string>{"--select", "100000", "--out", ws / "j"}).code == 2);

  const std::vector<std::string> flat{"train",       "--corpus", ws / "c.jsonl", "--max-epochs", "1",
                                      "--attention", "none",     "--out",         ws / "flat"};
  REQUIRE(invoke(flat + kSmallModel).code == 0);
  CHECK(invoke({"inspect-attention", "--checkpoint", ws / "flat/model.ckpt", "--corpus", ws / "c.jsonl", "--out",
             ws / "k"})
            .code == 2);
}

TEST_CASE("help exits cleanly and unknown commands are usage errors") {
  CHECK(invoke({"--help"}).code == 0);
  CHECK(invoke({"frobnicate"}).code == 2);
  CHECK(invoke({"train", "--no-such-key", "1"}).code == 2);
}
