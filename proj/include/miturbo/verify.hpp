#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "miturbo/tensor.hpp"

// Property suites behind `miturbo verify` and the acceptance harness. Each
// suite returns one record per property with the achieved margin; the
// brute-force enumeration in oracles is the ground truth for the bounds
// suite, and central finite differences are the oracle for gradcheck.
namespace miturbo::verify {

struct PropertyResult {
    std::string name;
    double margin = 0.0;     // achieved value, to be compared with threshold
    double threshold = 0.0;  // pass iff margin <= threshold (or >= for floors)
    bool pass = false;
    std::string detail;
};

// Central-difference gradient of `f` w.r.t. `leaf`'s values; f must rebuild
// its forward pass on every call.
std::vector<double> finite_difference(const std::function<double()>& f,
                                      nn::Tensor leaf, double eps = 1e-5);

// max_i |a_i - b_i| / max(1, |a_i|, |b_i|).
double max_rel_error(const std::vector<double>& a, const std::vector<double>& b);

std::vector<PropertyResult> stability_suite();
std::vector<PropertyResult> bounds_suite(int trials = 1000, uint64_t seed = 1234);
std::vector<PropertyResult> gradcheck_suite(uint64_t seed = 99);
std::vector<PropertyResult> infonce_floor_suite(int trials = 10000,
                                                uint64_t seed = 77);

// Conditional-only sigmoid training on a small linear model, with the twin
// denominator or the adversarial critic optionally switched in.
enum class CollapseMode { SigmoidCrossOnly, TwinDenominator, Critic };

struct CollapseResult {
    double mean_all_outputs = 0.0;        // mean sigmoid over every (i, c)
    double mean_nontarget_outputs = 0.0;  // mean sigmoid over c != y_i
    int steps = 0;
};

CollapseResult collapse_probe(CollapseMode mode, int steps = 2000,
                              uint64_t seed = 5);

}  // namespace miturbo::verify
