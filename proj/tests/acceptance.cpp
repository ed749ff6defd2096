#include "udslab/verify.hpp"

#include <cstdio>

int main() {
    const auto results = udslab::verify::run_suite("all");
    const int failures = udslab::verify::print_results(results);
    std::printf("%zu criteria, %d failed\n", results.size(), failures);
    return failures == 0 ? 0 : 1;
}
