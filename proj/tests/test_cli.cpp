#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "helpers.hpp"
#include "ric/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run ric_run(std::vector<std::string> args) {
  args.insert(args.begin(), "ric");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = ric::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

// A scratch copy of a fixture, or a new file with `text`.
struct TempFile {
  fs::path path;
  TempFile(const std::string& name, const std::string& text) {
    path = fs::temp_directory_path() / ("ric_test_" + std::to_string(::getpid()) + "_" + name);
    std::ofstream(path, std::ios::binary) << text;
  }
  ~TempFile() { fs::remove(path); }
  std::string read() const { return testing::read_text(path.string()); }
};

std::string fixture(const char* name) { return testing::data_path(name); }

}  // namespace

TEST_CASE("exit codes") {
  CHECK(ric_run({"check", fixture("dead_input.c")}).code == 0);
  CHECK(ric_run({"check", fixture("motivating.c")}).code == 1);
  CHECK(ric_run({"check", "/nonexistent/file.c"}).code == 2);
  CHECK(ric_run({"frobnicate"}).code == 2);
  CHECK(ric_run({"check", "--trials", "0", fixture("motivating.c")}).code == 2);

  const TempFile fld("fld.c", "void f(double x) { __asm__ (\"fld %0\" : : \"m\" (x)); }\n");
  CHECK(ric_run({"check", fld.path.string()}).code == 3);
  const TempFile empty("empty.c", "");
  CHECK(ric_run({"check", empty.path.string()}).code == 0);
  const TempFile broken("broken.c", "void f(void) { __asm__ (\"nop\" : \"=r\" ; }\n");
  CHECK(ric_run({"check", broken.path.string()}).code == 2);
}

TEST_CASE("the installed binary reports the same exit codes") {
  const std::string bin = RIC_BINARY;
  auto status = [&](const std::string& args) {
    const int raw = std::system((bin + " " + args + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(raw);
  };
  CHECK(status("check " + fixture("dead_input.c")) == 0);
  CHECK(status("check " + fixture("motivating.c")) == 1);
  CHECK(status("--bogus") == 2);
}

TEST_CASE("chunk files and formats") {
  const Run r = ric_run({"check", "--format", "json", "--chunks", fixture("taxonomy.json")});
  CHECK(r.code == 1);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["summary"]["chunks"] == 11);
  const Run text = ric_run({"check", "--format", "text", fixture("motivating.c")});
  CHECK(text.out.find("ReadOnlyInputClobbered") != std::string::npos);
}

TEST_CASE("JSON output is byte-identical across runs") {
  const auto a = ric_run({"check", "--format", "json", "--chunks", fixture("corpus.json")});
  const auto b = ric_run({"check", "--format", "json", "--chunks", fixture("corpus.json")});
  CHECK(a.out == b.out);
  const auto pa = ric_run({"patch", "--format", "json", fixture("motivating.c")});
  const auto pb = ric_run({"patch", "--format", "json", fixture("motivating.c")});
  CHECK(pa.out == pb.out);
}

TEST_CASE("patching in place") {
  SUBCASE("a compliant file is left untouched") {
    const TempFile f("ok.c", testing::read_text(fixture("dead_input.c")));
    const std::string before = f.read();
    CHECK(ric_run({"patch", "--in-place", f.path.string()}).code == 0);
    CHECK(f.read() == before);
  }
  SUBCASE("a patched file then checks clean") {
    const TempFile f("cas.c", testing::read_text(fixture("motivating.c")));
    CHECK(ric_run({"patch", "--in-place", f.path.string()}).code == 1);
    CHECK(f.read().find("\"ebx\"") != std::string::npos);
    CHECK(ric_run({"check", f.path.string()}).code == 0);
  }
  SUBCASE("refine in place drops the dead input") {
    const TempFile f("dead.c", testing::read_text(fixture("dead_input.c")));
    ric_run({"refine", "--in-place", f.path.string()});
    CHECK(f.read().find("\"r\"(unused)") == std::string::npos);
    CHECK(ric_run({"check", f.path.string()}).code == 0);
  }
}

TEST_CASE("report file option") {
  const TempFile out("report.json", "");
  CHECK(ric_run({"check", "--format", "json", "--out", out.path.string(), fixture("motivating.c")}).code == 1);
  const auto j = nlohmann::json::parse(out.read());
  CHECK(j["summary"]["serious"] == 1);
}
