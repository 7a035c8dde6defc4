// Acceptance runner: one line per criterion, exit status 1 if any fails.
// Criterion 8 runs when HARSEL_UCIHAR_DIR names an extracted UCI HAR Dataset.

#include <cstdlib>
#include <iostream>

#include "acceptance_criteria.hpp"

int main() {
    harsel::acceptance::SuiteOptions opt;
    if (const char* dir = std::getenv("HARSEL_UCIHAR_DIR"); dir && *dir) opt.ucihar_dir = dir;
    if (const char* t = std::getenv("HARSEL_THREADS"); t && *t)
        opt.threads = static_cast<unsigned>(std::strtoul(t, nullptr, 10));

    int failures = 0;
    for (const auto& o : harsel::acceptance::run_suite(opt)) {
        std::cout << harsel::acceptance::format_line(o) << std::endl;
        failures += o.status == harsel::acceptance::Status::Fail;
    }
    return failures == 0 ? 0 : 1;
}
