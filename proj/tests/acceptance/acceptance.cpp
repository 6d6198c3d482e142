// Runs acceptance criteria 1-9 and prints one verdict line per criterion.
// Exit status is nonzero if any criterion fails.

#include <cstdio>
#include <cstdlib>
#include <string>

#include "coag/validation.hpp"

int main(int argc, char** argv) {
  coag::SuiteConfig suite;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg.rfind("--scale=", 0) == 0) suite.replica_scale = std::stod(arg.substr(8));
    else if (arg.rfind("--threads=", 0) == 0) suite.threads = static_cast<unsigned>(std::stoul(arg.substr(10)));
    else {
      std::fprintf(stderr, "usage: %s [--scale=F] [--threads=K]\n", argv[0]);
      return 2;
    }
  }
  int failed = 0;
  coag::run_suite(suite, [&](const coag::CriterionResult& res) {
    std::printf("%s\n", coag::verdict_line(res).c_str());
    std::fflush(stdout);
    if (!res.report.passed()) ++failed;
  });
  std::printf("%d of 9 criteria failed\n", failed);
  return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
