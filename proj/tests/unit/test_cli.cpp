#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "stepml/cli.hpp"
#include "stepml/render.hpp"

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = stepml::run_cli(args, out, err);
  return {code, out.str(), stepml::strip_ansi(err.str())};
}

std::string write(const std::string& name, const std::string& contents) {
  const auto dir = std::filesystem::temp_directory_path() / "stepml_cli_tests";
  std::filesystem::create_directories(dir);
  const auto path = dir / name;
  std::ofstream(path) << contents;
  return path.string();
}

}  // namespace

TEST_CASE("exit codes") {
  CHECK(cli({"-show", "-e", "1 + 2"}).code == 0);
  Result uncaught = cli({"-show", "-e", "1/0"});
  CHECK(uncaught.code == 2);
  CHECK(uncaught.err == "Exception: Division_by_zero.\n");
  CHECK(cli({"-show", "-no-such-flag", "-e", "1"}).code == 1);
  CHECK(cli({"-show"}).code == 1);  // nothing to run
  CHECK(cli({"-show", "/nonexistent/file.ml"}).code == 1);
  Result syntax = cli({"-show", "-e", "let = 3"});
  CHECK(syntax.code == 1);
  CHECK(syntax.err.find("-e:1:5:") != std::string::npos);
  CHECK(cli({"-show-all", "-search", "\"open", "-e", "1"}).code == 1);
}

TEST_CASE("-show prints the value") {
  CHECK(cli({"-show", "-e", "[1; 2] @ [3]"}).out == "[1; 2; 3]\n");
  CHECK(cli({"-show", "-e", "print_string \"hi\"; 5"}).out == "hi5\n");
  CHECK(cli({"-show", "-e", "let f x = x"}).out == "let f x = x\n");
}

TEST_CASE("-show-all writes the trace to stderr") {
  Result r = cli({"-show-all", "-e", "1 + 2 * 3"});
  CHECK(r.out.empty());
  CHECK(r.err == "1 + 2 * 3\n1 + 6\n7\n");
  Result arrows = cli({"-show-all", "-arrows", "-e", "1 + 2 * 3"});
  CHECK(arrows.err == "   1 + 2 * 3\n=> 1 + 6\n=> 7\n");
  Result elided = cli({"-show-all", "-elide", "-e", "1 + 2 * 3"});
  CHECK(elided.err == "   1 + 2 * 3\n=>* 7\n");
  Result plain = cli({"-show-all", "-elide", "-no-arrows", "-e", "1 * (2 * (3 * 4))"});
  CHECK(plain.err == "1 * (2 * (3 * 4))\n24\n");
}

TEST_CASE("stepping limits") {
  Result r = cli({"-show", "-step-budget", "1000", "-e", "let rec f x = f x in f 0"});
  CHECK(r.code == 1);
  CHECK(r.err.find("step budget") != std::string::npos);
}

TEST_CASE("ANSI output") {
  std::ostringstream out, err;
  stepml::run_cli({"-show-all", "-ansi", "-e", "1 + 2 * 3"}, out, err);
  CHECK(err.str().find("\x1b[4m2 * 3\x1b[24m") != std::string::npos);
  std::ostringstream out2, err2;
  stepml::run_cli({"-show-all", "-e", "1 + 2 * 3"}, out2, err2, true);
  CHECK(err2.str().find("\x1b[") != std::string::npos);
  std::ostringstream out3, err3;
  stepml::run_cli({"-show-all", "-plain", "-e", "1 + 2 * 3"}, out3, err3, true);
  CHECK(err3.str().find("\x1b[") == std::string::npos);
}

TEST_CASE("modules come from the earlier files") {
  const std::string a = write("a.ml", "let double x = x * 2\nlet base = 10\n");
  const std::string b = write("b.ml", "let calc n = A.double n + A.base\n");
  const std::string main = write("main.ml", "let _ = B.calc 4\n");
  Result r = cli({"-show", a, b, main});
  CHECK(r.code == 0);
  CHECK(r.out == "18\n");
  Result e = cli({"-show", a, "-e", "A.double 21"});
  CHECK(e.out == "42\n");
}

TEST_CASE("search flags") {
  Result r = cli({"-show-all", "-search", "[_; _; _]", "-n", "1", "-e",
                  "map (fun x -> x + 1) [1; 2; 3]"});
  CHECK(r.code == 0);
  CHECK(r.err == "map (fun x -> x + 1) [1; 2; 3]\n");
  Result stop = cli({"-show-all", "-search", "print_int", "-n", "1", "-stop", "-e",
                     "print_int 1; print_int 2"});
  CHECK(stop.code == 0);
  CHECK(stop.out.empty());
}

TEST_CASE("usage") {
  Result help = cli({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("-show-all") != std::string::npos);
}
