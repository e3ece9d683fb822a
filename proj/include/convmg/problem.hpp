#pragma once

#include <string>
#include <vector>

#include "convmg/conv.hpp"

namespace convmg {

enum class ProblemFamily { Poisson5, Poisson9, Mehrstellen, Anisotropic, Mixed };

/// A discretized model problem: the Jacobi-preconditioned stencil of the
/// fine-grid operator, plus the parameters that produced it.
struct ProblemSpec {
    ProblemFamily family = ProblemFamily::Poisson5;
    double epsilon = 0.0;  // Anisotropic only
    double tau = 0.0;      // Mixed only
    Kernel stencil;
    std::string name;  // CLI name, e.g. "p5", "aniso10"
};

/// Exact preconditioned stencil for a family. epsilon is required for
/// Anisotropic (must be > 0), tau for Mixed; both ignored otherwise.
Kernel stencil_for(ProblemFamily family, double epsilon = 0.0, double tau = 0.0);

/// Symmetric Jacobi rescaling D^{-1/2} A D^{-1/2}. For constant-coefficient
/// stencils with eliminated Dirichlet boundaries the diagonal of A equals
/// the center entry everywhere, so this divides the stencil by its center.
Kernel precondition_stencil(const Kernel& raw);

ProblemSpec make_problem(ProblemFamily family, double epsilon = 0.0, double tau = 0.0);

/// CLI names of the seven table configurations:
/// p5, p9, pm, aniso2, aniso10, mixed14, mixed34.
ProblemSpec problem_by_name(const std::string& name);
const std::vector<std::string>& problem_names();

/// The fine-grid operator A1 as a black-box field map: conv_same with the
/// problem stencil.
GridField apply_fine_operator(const ProblemSpec& spec, const GridField& x);

}  // namespace convmg
