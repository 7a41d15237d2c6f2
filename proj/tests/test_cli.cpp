#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"

// Process-level tests of the command-line tool.

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = POIRANK_CLI_PATH;

struct RunResult {
  int exit_code;
  std::string output;
};

RunResult run(const std::string& args) {
  std::string out_path =
      (fs::temp_directory_path() / ("poirank_cli_out_" + std::to_string(rand()) + ".txt"))
          .string();
  std::string cmd = kCli + " " + args + " > " + out_path + " 2>&1";
  int status = std::system(cmd.c_str());
  std::ifstream in(out_path);
  std::string output{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  fs::remove(out_path);
  int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return {code, output};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

size_t count_lines(const std::string& s) {
  size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

// Shared workspace generated once; later cases reuse the artifacts.
struct Workspace {
  fs::path dir;
  std::string catalog, data_dir, ckpt;

  Workspace() {
    dir = fs::temp_directory_path() / "poirank_cli_ws";
    fs::create_directories(dir);
    catalog = (dir / "catalog.jsonl").string();
    data_dir = (dir / "data").string();
    ckpt = (dir / "spnet.ckpt").string();
  }

  static Workspace& instance() {
    static Workspace ws;
    return ws;
  }
};

}  // namespace

TEST_CASE("gen-catalog: determinism, summary, usage errors") {
  Workspace& ws = Workspace::instance();
  auto r1 = run("gen-catalog --out " + ws.catalog + " --cities 6 --min-size 30 --max-size 120 --seed 7");
  REQUIRE(r1.exit_code == 0);
  CHECK(r1.output.find("6 cities") != std::string::npos);

  std::string again = (ws.dir / "catalog2.jsonl").string();
  auto r2 = run("gen-catalog --out " + again + " --cities 6 --min-size 30 --max-size 120 --seed 7");
  REQUIRE(r2.exit_code == 0);
  CHECK(read_file(ws.catalog) == read_file(again));

  CHECK(run("gen-catalog --out /tmp/x.jsonl --cities 0").exit_code == 2);
  CHECK(run("gen-catalog --cities 5").exit_code == 2);  // missing --out
}

TEST_CASE("gen-data: sizes, stats, hybrid keywords") {
  Workspace& ws = Workspace::instance();
  auto r = run("gen-data --catalog " + ws.catalog + " --out-dir " + ws.data_dir +
               " --seed 3 --sizes 45,9,9 --negatives 25 --threads 2");
  REQUIRE(r.exit_code == 0);
  CHECK(count_lines(read_file(ws.data_dir + "/train.jsonl")) == 45);
  CHECK(count_lines(read_file(ws.data_dir + "/dev.jsonl")) == 9);
  CHECK(count_lines(read_file(ws.data_dir + "/test.jsonl")) == 9);

  json stats = json::parse(read_file(ws.data_dir + "/stats.json"));
  CHECK(stats.at("total_questions") == 63);
  CHECK(stats.at("category_counts").size() == 3);
  CHECK(stats.at("universe_histogram").size() == 5);
  CHECK(stats.contains("distractor_share"));
  CHECK(stats.at("run_config").at("seed") == 3);

  // second run is byte-identical
  std::string dir2 = (ws.dir / "data2").string();
  auto r2 = run("gen-data --catalog " + ws.catalog + " --out-dir " + dir2 +
                " --seed 3 --sizes 45,9,9 --negatives 25 --threads 2");
  REQUIRE(r2.exit_code == 0);
  CHECK(read_file(ws.data_dir + "/train.jsonl") == read_file(dir2 + "/train.jsonl"));
  CHECK(read_file(ws.data_dir + "/test.jsonl") == read_file(dir2 + "/test.jsonl"));

  // hybrid: every line carries a keyword
  std::string hdir = (ws.dir / "hybrid").string();
  auto rh = run("gen-data --catalog " + ws.catalog + " --out-dir " + hdir +
                " --seed 4 --sizes 12,3,3 --negatives 10 --hybrid");
  REQUIRE(rh.exit_code == 0);
  std::ifstream in(hdir + "/train.jsonl");
  std::string line;
  size_t n = 0;
  while (std::getline(in, line)) {
    CHECK(json::parse(line).contains("keyword"));
    ++n;
  }
  CHECK(n == 12);

  CHECK(run("gen-data --catalog /nonexistent.jsonl --out-dir /tmp/nope").exit_code == 1);
}

TEST_CASE("train: smoke run, metrics file, reproducibility, usage errors") {
  Workspace& ws = Workspace::instance();
  std::string metrics = (ws.dir / "m.json").string();
  auto r = run("train --model spnet --data " + ws.data_dir + " --catalog " + ws.catalog +
               " --out " + ws.ckpt + " --metrics " + metrics +
               " --epochs 2 --seed 5 --dev-sample 0 --threads 2");
  REQUIRE(r.exit_code == 0);
  json m = json::parse(read_file(metrics));
  REQUIRE(m.at("history").size() >= 2);
  double loss1 = m.at("history")[1].at("mean_loss").get<double>();
  CHECK(loss1 > 0.0);
  CHECK(m.at("run_config").at("model") == "spnet");

  // same seed reproduces the metrics file exactly
  std::string ckpt2 = (ws.dir / "spnet2.ckpt").string();
  std::string metrics2 = (ws.dir / "m2.json").string();
  auto r2 = run("train --model spnet --data " + ws.data_dir + " --catalog " + ws.catalog +
                " --out " + ckpt2 + " --metrics " + metrics2 +
                " --epochs 2 --seed 5 --dev-sample 0 --threads 2");
  REQUIRE(r2.exit_code == 0);
  json m2 = json::parse(read_file(metrics2));
  m2["run_config"]["out"] = m["run_config"]["out"];
  m2["run_config"]["metrics"] = "";
  json m1 = m;
  m1["run_config"]["metrics"] = "";
  CHECK(m1.at("history") == m2.at("history"));
  // parameters are identical; only the echoed output paths in meta may differ
  json c1 = json::parse(read_file(ws.ckpt));
  json c2 = json::parse(read_file(ckpt2));
  CHECK(c1.at("params") == c2.at("params"));
  CHECK(c1.at("vocab") == c2.at("vocab"));

  CHECK(run("train --model nonsense --data x --catalog y --out z").exit_code == 2);
  CHECK(run("train --model joint --data " + ws.data_dir + " --catalog " + ws.catalog +
            " --out /tmp/j.ckpt")
            .exit_code == 2);  // missing --init-spatial
}

TEST_CASE("eval: baseline needs no checkpoint, reports all buckets, reruns identical") {
  Workspace& ws = Workspace::instance();
  std::string report = (ws.dir / "sd_report.json").string();
  auto r = run("eval --baseline sd --data " + ws.data_dir + "/test.jsonl --catalog " +
               ws.catalog + " --out-report " + report);
  REQUIRE(r.exit_code == 0);
  json doc = json::parse(read_file(report));
  CHECK(doc.at("by_universe_bucket").size() == 5);
  CHECK(doc.at("aggregate").at("count") == 9);

  std::string report2 = (ws.dir / "sd_report2.json").string();
  auto r2 = run("eval --baseline sd --data " + ws.data_dir + "/test.jsonl --catalog " +
                ws.catalog + " --out-report " + report2);
  REQUIRE(r2.exit_code == 0);
  json doc2 = json::parse(read_file(report2));
  doc2["run_config"]["out_report"] = doc["run_config"]["out_report"];
  CHECK(doc == doc2);

  // model eval also works end to end
  std::string mreport = (ws.dir / "model_report.json").string();
  auto rm = run("eval --model-file " + ws.ckpt + " --data " + ws.data_dir +
                "/test.jsonl --catalog " + ws.catalog + " --out-report " + mreport);
  REQUIRE(rm.exit_code == 0);
  CHECK(run("eval --data x --catalog y --out-report z").exit_code == 2);  // neither source
  CHECK(run("eval --model-file /nonexistent.ckpt --data " + ws.data_dir +
            "/test.jsonl --catalog " + ws.catalog + " --out-report /tmp/r.json")
            .exit_code == 1);
}

TEST_CASE("rank: top-N rows, N beyond the universe prints everything") {
  Workspace& ws = Workspace::instance();
  // single-question file
  std::string one = (ws.dir / "one.jsonl").string();
  {
    std::ifstream in(ws.data_dir + "/test.jsonl");
    std::string line;
    std::getline(in, line);
    std::ofstream out(one);
    out << line << "\n";
  }
  auto r1 = run("rank --model-file " + ws.ckpt + " --question-file " + one + " --catalog " +
                ws.catalog + " --top 1");
  REQUIRE(r1.exit_code == 0);
  // exactly one data row: header + question line + 1
  CHECK(count_lines(r1.output) == 3);

  auto rbig = run("rank --model-file " + ws.ckpt + " --question-file " + one + " --catalog " +
                  ws.catalog + " --top 99999");
  REQUIRE(rbig.exit_code == 0);
  json q = json::parse(read_file(one));
  CHECK(count_lines(rbig.output) >= 10);  // full universe
}

TEST_CASE("probe: 2 candidates x mentions rows, weights in range, deterministic") {
  Workspace& ws = Workspace::instance();
  // pick a question with 2 mentions and two universe entity ids from the catalog
  std::string qfile = (ws.dir / "probe_q.jsonl").string();
  json q;
  {
    std::ifstream in(ws.data_dir + "/test.jsonl");
    std::string line;
    while (std::getline(in, line)) {
      json j = json::parse(line);
      if (j.at("mentions").size() == 2) {
        q = j;
        break;
      }
    }
    REQUIRE(!q.is_null());
    std::ofstream out(qfile);
    out << q.dump() << "\n";
  }
  std::string id1 = q.at("gold_id").get<std::string>();
  std::string id2 = q.at("negatives")[0].at("entity_id").get<std::string>();
  std::string csv = (ws.dir / "probe.csv").string();
  auto r = run("probe --model-file " + ws.ckpt + " --question-file " + qfile + " --catalog " +
               ws.catalog + " --candidates " + id1 + "," + id2 + " --out " + csv);
  REQUIRE(r.exit_code == 0);
  std::string content = read_file(csv);
  CHECK(count_lines(content) == 5);  // header + 2x2 rows
  CHECK(content.rfind("qid,candidate_id,mention,distance_km,weight", 0) == 0);

  std::istringstream lines(content);
  std::string line;
  std::getline(lines, line);  // header
  while (std::getline(lines, line)) {
    size_t last = line.rfind(',');
    double w = std::stod(line.substr(last + 1));
    CHECK(w > -1.0);
    CHECK(w < 1.0);
  }

  std::string csv2 = (ws.dir / "probe2.csv").string();
  auto r2 = run("probe --model-file " + ws.ckpt + " --question-file " + qfile + " --catalog " +
                ws.catalog + " --candidates " + id1 + "," + id2 + " --out " + csv2);
  REQUIRE(r2.exit_code == 0);
  CHECK(read_file(csv) == read_file(csv2));

  CHECK(run("probe --model-file " + ws.ckpt + " --question-file " + qfile + " --catalog " +
            ws.catalog + " --candidates bogus_id --out /tmp/p.csv")
            .exit_code == 1);
}

TEST_CASE("grad-check: passes, fails under corruption, reproducible") {
  auto r = run("grad-check --seed 21");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("PASS") != std::string::npos);

  auto rc = run("grad-check --seed 21 --corrupt-tanh");
  CHECK(rc.exit_code == 1);

  auto r2 = run("grad-check --seed 21");
  CHECK(r.output == r2.output);
}

TEST_CASE("config file supplies defaults, flags win") {
  Workspace& ws = Workspace::instance();
  std::string cfg = (ws.dir / "config.json").string();
  {
    std::ofstream out(cfg);
    out << R"({"cities": 4, "seed": 9, "min-size": 30, "max-size": 80})";
  }
  std::string out1 = (ws.dir / "cfg_catalog.jsonl").string();
  auto r = run("--config " + cfg + " gen-catalog --out " + out1);
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("4 cities") != std::string::npos);

  // flag overrides the config value
  std::string out2 = (ws.dir / "cfg_catalog2.jsonl").string();
  auto r2 = run("--config " + cfg + " gen-catalog --out " + out2 + " --cities 2");
  REQUIRE(r2.exit_code == 0);
  CHECK(r2.output.find("2 cities") != std::string::npos);
}
