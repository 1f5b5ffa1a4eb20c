#include <doctest.h>

#include <json.hpp>

#include <sstream>

#include "rlid/cli.hpp"
#include "rlid/io.hpp"
#include "support.hpp"

using namespace rlid;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args, const std::string& input = "") {
  std::istringstream in(input);
  std::ostringstream out, err;
  const int code = cli::run(args, in, out, err);
  return {code, out.str(), err.str()};
}

// A tiny corpus with fixture translations for every sentence.
struct Workspace {
  testing::TempDir dir{"cli"};

  Workspace() {
    dir.write("corpus.txt",
              "how are you\nsee you tomorrow\nthank you\ngood night\nwhere are you\n"
              "what is your name\ni am fine\nok\nhow are you\n");
    dir.write("fixtures.tsv",
              "how are you\thindi\tआप कैसे हो\n"
              "how are you\trussian\tкак дела\n"
              "see you tomorrow\thindi\tकल मिलते हैं\n"
              "see you tomorrow\trussian\tувидимся завтра\n"
              "thank you\thindi\tधन्यवाद\n"
              "thank you\trussian\tспасибо\n"
              "good night\thindi\tशुभ रात्रि\n"
              "good night\trussian\tспокойной ночи\n"
              "where are you\thindi\tतुम कहाँ हो\n"
              "where are you\trussian\tгде ты\n"
              "what is your name\thindi\tतुम्हारा नाम क्या है\n"
              "what is your name\trussian\tкак тебя зовут\n"
              "i am fine\thindi\tमैं ठीक हूँ\n"
              "i am fine\trussian\tу меня всё хорошо\n");
  }

  std::string path(const std::string& name) const { return (dir / name).string(); }

  std::vector<std::string> generate_args(const std::string& out) const {
    return {"generate",
            "--corpus", path("corpus.txt"),
            "--fixtures", path("fixtures.tsv"),
            "--table", "hindi=" + testing::source_path("tables/devanagari.tsv").string(),
            "--table", "russian=" + testing::source_path("tables/cyrillic.tsv").string(),
            "--out", out};
  }

  // generate -> split -> vocab -> train with a very small model
  void pipeline(std::size_t epochs = 2) const {
    REQUIRE(run(generate_args(path("data.tsv"))).code == 0);
    REQUIRE(run({"split", "--data", path("data.tsv"), "--ratio", "0.7", "--train-out", path("train.tsv"),
                 "--validation-out", path("val.tsv")})
                .code == 0);
    REQUIRE(run({"vocab", "--data", path("train.tsv"), "--out", path("vocab.json")}).code == 0);
    const auto r = run({"train", "--train", path("train.tsv"), "--validation", path("val.tsv"), "--vocab",
                        path("vocab.json"), "--hidden-dim", "8", "--layers", "1", "--heads", "2", "--ff-dim", "8",
                        "--max-len", "32", "--epochs", std::to_string(epochs), "--lr", "1e-3", "--out",
                        path("model.ckpt"), "--history", path("history.json")});
    REQUIRE_MESSAGE(r.code == 0, r.err);
  }
};

std::size_t count_lines(const std::string& s, const std::string& prefix) {
  std::size_t n = 0;
  for (const auto& line : io::split_lines(s)) n += line.rfind(prefix, 0) == 0;
  return n;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit 1") {
    CHECK(run({}).code == 1);
    CHECK(run({"frobnicate"}).code == 1);
    CHECK(run({"split", "--data", "x"}).code == 1);
    CHECK(run({"train", "--train", "a", "--vocab", "b", "--out", "c", "--epochs", "many"}).code == 1);
    const auto help = run({"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("generate") != std::string::npos);
  }

  TEST_CASE("a missing table names the label and exits 1") {
    Workspace ws;
    auto args = ws.generate_args(ws.path("data.tsv"));
    args.erase(args.begin() + 7, args.begin() + 9);  // drop the russian table
    const auto r = run(args);
    CHECK(r.code == 1);
    CHECK(r.err.find("missing --table for label 'russian'") != std::string::npos);
  }

  TEST_CASE("missing or malformed files exit 2 and name the path") {
    Workspace ws;
    const auto r = run({"split", "--data", ws.path("absent.tsv"), "--train-out", ws.path("a"), "--validation-out",
                        ws.path("b")});
    CHECK(r.code == 2);
    CHECK(r.err.find("absent.tsv") != std::string::npos);
    ws.dir.write("bad.tsv", "only one column\n");
    CHECK(run({"vocab", "--data", ws.path("bad.tsv"), "--out", ws.path("v.json")}).code == 2);
    ws.dir.write("bad.ckpt", "not a checkpoint");
    const auto e = run({"inspect", "--checkpoint", ws.path("bad.ckpt")});
    CHECK(e.code == 2);
    CHECK(e.err.find("bad magic") != std::string::npos);
  }

  TEST_CASE("generate reports counts and is deterministic") {
    Workspace ws;
    const auto a = run(ws.generate_args(ws.path("a.tsv")));
    REQUIRE_MESSAGE(a.code == 0, a.err);
    CHECK(a.out.find("corpus 9 records, 7 after filtering") != std::string::npos);
    CHECK(a.out.find("hindi 7 produced, 0 dropped empty, 0 provider failures") != std::string::npos);
    CHECK(a.out.find("wrote 21 records") != std::string::npos);
    REQUIRE(run(ws.generate_args(ws.path("b.tsv"))).code == 0);
    CHECK(io::read_file(ws.path("a.tsv")) == io::read_file(ws.path("b.tsv")));
    CHECK(io::read_file(ws.path("a.tsv")).find("kak dela\trussian\n") != std::string::npos);

    // a cached second run without fixtures reproduces the same bytes
    auto cached = ws.generate_args(ws.path("c.tsv"));
    cached.push_back("--cache-dir");
    cached.push_back(ws.path("cache"));
    REQUIRE(run(cached).code == 0);
    ws.dir.write("empty_fixtures.tsv", "");
    cached[4] = ws.path("empty_fixtures.tsv");
    cached[cached.size() - 3] = ws.path("d.tsv");
    const auto d = run(cached);
    REQUIRE_MESSAGE(d.code == 0, d.err);
    CHECK(io::read_file(ws.path("d.tsv")) == io::read_file(ws.path("a.tsv")));
  }

  TEST_CASE("split and vocab") {
    Workspace ws;
    REQUIRE(run(ws.generate_args(ws.path("data.tsv"))).code == 0);
    const auto r = run({"split", "--data", ws.path("data.tsv"), "--ratio", "0.8", "--train-out", ws.path("t.tsv"),
                        "--validation-out", ws.path("v.tsv")});
    CHECK(r.code == 0);
    CHECK(r.out.find("train 17 records") != std::string::npos);
    CHECK(r.out.find("validation 4 records") != std::string::npos);
    const auto v = run({"vocab", "--data", ws.path("t.tsv"), "--max-size", "10", "--out", ws.path("vocab.json")});
    CHECK(v.code == 0);
    CHECK(v.out.find("vocabulary 10 tokens") != std::string::npos);
    CHECK(run({"split", "--data", ws.path("data.tsv"), "--ratio", "1.5", "--train-out", ws.path("t.tsv"),
               "--validation-out", ws.path("v.tsv")})
              .code == 1);
  }

  TEST_CASE("train, eval, predict and inspect") {
    Workspace ws;
    ws.pipeline(1);
    const auto history = nlohmann::json::parse(io::read_file(ws.path("history.json")));
    CHECK(history.at("history").at("epochs").size() == 1);
    CHECK(history.at("seed") == 42);

    const auto e = run({"eval", "--checkpoint", ws.path("model.ckpt"), "--data", ws.path("val.tsv"),
                        "--baseline-train", ws.path("train.tsv")});
    REQUIRE_MESSAGE(e.code == 0, e.err);
    CHECK(count_lines(e.out, "accuracy 0.") + count_lines(e.out, "accuracy 1.") == 1);
    CHECK(count_lines(e.out, "baseline accuracy ") == 1);
    CHECK(count_lines(e.out, "agreement ") == 1);

    const auto j = run({"eval", "--checkpoint", ws.path("model.ckpt"), "--data", ws.path("val.tsv"), "--json"});
    REQUIRE(j.code == 0);
    const auto doc = nlohmann::json::parse(j.out);
    CHECK(doc.at("examples") == 6);
    CHECK(doc.at("labels") == nlohmann::json{"english", "hindi", "russian"});

    const auto p = run({"predict", "--checkpoint", ws.path("model.ckpt"), "--text", "kak dela", "--text", "hello"});
    CHECK(p.code == 0);
    CHECK(io::split_lines(p.out).size() == 2);
    const auto s = run({"predict", "--checkpoint", ws.path("model.ckpt")}, "ap kaise ho\nthank you\r\n\n");
    CHECK(s.code == 0);
    const auto lines = io::split_lines(s.out);
    REQUIRE(lines.size() == 3);
    for (const auto& line : lines) {
      const auto space = line.find(' ');
      REQUIRE(space != std::string::npos);
      CHECK(line.size() - space - 1 == 6);  // probability with 4 decimals
    }

    const auto i = run({"inspect", "--checkpoint", ws.path("model.ckpt")});
    CHECK(i.code == 0);
    CHECK(i.out.find("labels english,hindi,russian") != std::string::npos);
    CHECK(count_lines(i.out, "embeddings.token ") == 1);
    CHECK(count_lines(i.out, "classifier.bias ") == 1);
  }

  TEST_CASE("epoch lines follow the requested epoch count") {
    Workspace ws;
    ws.pipeline(3);
    const auto r = run({"train", "--train", ws.path("train.tsv"), "--vocab", ws.path("vocab.json"), "--hidden-dim",
                        "4", "--layers", "1", "--heads", "1", "--ff-dim", "4", "--max-len", "32", "--epochs", "2",
                        "--out", ws.path("m2.ckpt")});
    CHECK(r.code == 0);
    CHECK(count_lines(r.out, "epoch ") == 2);
    CHECK(r.out.find("epoch 2/2") != std::string::npos);
    CHECK(r.out.find("validation_accuracy") == std::string::npos);
  }

  TEST_CASE("a diverging run exits 3") {
    Workspace ws;
    ws.pipeline(1);
    const auto r = run({"train", "--train", ws.path("train.tsv"), "--vocab", ws.path("vocab.json"), "--hidden-dim",
                        "4", "--layers", "1", "--heads", "1", "--ff-dim", "4", "--max-len", "32", "--lr", "1e30",
                        "--epochs", "3", "--out", ws.path("boom.ckpt")});
    CHECK(r.code == 3);
    CHECK(r.err.find("non-finite") != std::string::npos);
  }

  TEST_CASE("config file supplies subcommand flags") {
    Workspace ws;
    ws.pipeline(1);
    ws.dir.write("rlid.toml", "seed = 7\n[train]\nepochs = 2\nhidden-dim = 4\nheads = 1\nff-dim = 4\n");
    const auto r = run({"--config", ws.path("rlid.toml"), "train", "--train", ws.path("train.tsv"), "--vocab",
                        ws.path("vocab.json"), "--layers", "1", "--max-len", "32", "--out", ws.path("cfg.ckpt"),
                        "--history", ws.path("cfg.json")});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(count_lines(r.out, "epoch ") == 2);
    const auto doc = nlohmann::json::parse(io::read_file(ws.path("cfg.json")));
    CHECK(doc.at("seed") == 7);
    CHECK(doc.at("model").at("hidden_dim") == 4);

    // the command line wins over the file
    const auto o = run({"--config", ws.path("rlid.toml"), "train", "--train", ws.path("train.tsv"), "--vocab",
                        ws.path("vocab.json"), "--layers", "1", "--max-len", "32", "--epochs", "1", "--out",
                        ws.path("cfg2.ckpt")});
    CHECK(count_lines(o.out, "epoch ") == 1);
  }

  TEST_CASE("identical seeds give identical artifacts") {
    Workspace a, b;
    a.pipeline(1);
    b.pipeline(1);
    CHECK(io::read_file(a.path("data.tsv")) == io::read_file(b.path("data.tsv")));
    CHECK(io::read_file(a.path("train.tsv")) == io::read_file(b.path("train.tsv")));
    CHECK(io::read_file(a.path("model.ckpt")) == io::read_file(b.path("model.ckpt")));
  }
}
