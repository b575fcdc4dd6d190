#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rt {

struct CheckResult {
    std::string name;
    bool pass = false;
    double max_err = 0.0;
    std::string detail;
};

// Eq-form equivalence of the concatenated and split QKV projections over
// random graphs with random widths; tolerance 1e-12.
CheckResult check_form_equivalence(std::uint64_t seed, std::size_t trials);

// Four-term dot-product expansion equals the projected q·k; tolerance 1e-12.
CheckResult check_expansion_identity(std::uint64_t seed, std::size_t trials);

// d_e = 0 attention is the vanilla transformer layer, bitwise; a zeroed edge
// path with d_e > 0 matches it exactly as well.
CheckResult check_degenerate_reduction(std::uint64_t seed, std::size_t trials);

// Full multi-layer forward commutes with node permutation on both node and
// edge outputs; tolerance 1e-9.
CheckResult check_forward_equivariance(std::uint64_t seed, std::size_t trials,
                                       std::size_t layers);

// Analytic gradients of a full RT layer (attention + edge update) against
// central finite differences, h = 1e-5, per-parameter relative error < 1e-4.
CheckResult check_gradient_full_layer(std::uint64_t seed);

// Rows sum to 1 within 1e-12; masked entries are exactly zero.
CheckResult check_softmax_normalization(std::uint64_t seed, std::size_t trials);

// Perturbing any edge outside {(i,j),(j,i)} leaves e'_ij bit-identical,
// exhaustively on N=4.
CheckResult check_edge_locality(std::uint64_t seed);

// The whole suite in a fixed order.
std::vector<CheckResult> run_verify_suite(std::uint64_t seed);

}  // namespace rt
