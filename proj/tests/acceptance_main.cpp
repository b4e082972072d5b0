#include <cstdio>

#include "arw/acceptance.hpp"

int main(int argc, char** argv)
{
    arw::AcceptanceOptions opt;
    int only = 0;
    if (argc > 1) {
        only = std::atoi(argv[1]);
    }
    int failed = 0;
    auto report = [&](const arw::CriterionResult& r) {
        std::printf("%s\n", arw::format_result(r).c_str());
        std::fflush(stdout);
        failed += r.pass ? 0 : 1;
    };
    if (only > 0) {
        report(arw::run_criterion(only, opt));
    } else {
        arw::run_acceptance(opt, report);
    }
    std::printf("%d of %d criteria failed\n", failed,
                only > 0 ? 1 : arw::acceptance_criteria_count());
    return failed == 0 ? 0 : 1;
}
