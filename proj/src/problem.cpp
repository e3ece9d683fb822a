#include "convmg/problem.hpp"

#include <stdexcept>

namespace convmg {

namespace {

Kernel poisson5_kernel() {
    return Kernel(3, {0.0, -0.25, 0.0, -0.25, 1.0, -0.25, 0.0, -0.25, 0.0});
}

Kernel poisson9_kernel() {
    const double a = 1.0 / 60.0, b = -4.0 / 15.0;
    return Kernel(5, {0, 0, a, 0, 0,    //
                      0, 0, b, 0, 0,    //
                      a, b, 1, b, a,    //
                      0, 0, b, 0, 0,    //
                      0, 0, a, 0, 0});
}

// Mehrstellen nine-point stencil, unit center: axis neighbors -1/5,
// corners -1/20 (row sums vanish, as any pure second-order scheme requires).
Kernel mehrstellen_kernel() {
    const double c = -1.0 / 20.0, a = -1.0 / 5.0;
    return Kernel(3, {c, a, c, a, 1.0, a, c, a, c});
}

Kernel anisotropic_kernel(double epsilon) {
    if (epsilon <= 0.0) throw std::invalid_argument("stencil_for: epsilon must be positive");
    const double v = -1.0 / (2.0 + 2.0 * epsilon);
    const double h = -epsilon / (2.0 + 2.0 * epsilon);
    return Kernel(3, {0.0, v, 0.0, h, 1.0, h, 0.0, v, 0.0});
}

Kernel mixed_kernel(double tau) {
    const double c = tau / 8.0;
    return Kernel(3, {-c, -0.25, c, -0.25, 1.0, -0.25, c, -0.25, -c});
}

}  // namespace

Kernel stencil_for(ProblemFamily family, double epsilon, double tau) {
    switch (family) {
        case ProblemFamily::Poisson5: return poisson5_kernel();
        case ProblemFamily::Poisson9: return poisson9_kernel();
        case ProblemFamily::Mehrstellen: return mehrstellen_kernel();
        case ProblemFamily::Anisotropic: return anisotropic_kernel(epsilon);
        case ProblemFamily::Mixed: return mixed_kernel(tau);
    }
    throw std::invalid_argument("stencil_for: unknown family");
}

Kernel precondition_stencil(const Kernel& raw) {
    const int c = raw.radius();
    const double center = raw(c, c);
    if (center == 0.0) throw std::invalid_argument("precondition_stencil: zero center entry");
    return raw.scaled(1.0 / center);
}

ProblemSpec make_problem(ProblemFamily family, double epsilon, double tau) {
    ProblemSpec spec;
    spec.family = family;
    spec.epsilon = epsilon;
    spec.tau = tau;
    spec.stencil = stencil_for(family, epsilon, tau);
    switch (family) {
        case ProblemFamily::Poisson5: spec.name = "p5"; break;
        case ProblemFamily::Poisson9: spec.name = "p9"; break;
        case ProblemFamily::Mehrstellen: spec.name = "pm"; break;
        case ProblemFamily::Anisotropic: spec.name = epsilon == 2.0 ? "aniso2" : "aniso10"; break;
        case ProblemFamily::Mixed: spec.name = tau == 0.25 ? "mixed14" : "mixed34"; break;
    }
    return spec;
}

ProblemSpec problem_by_name(const std::string& name) {
    if (name == "p5") return make_problem(ProblemFamily::Poisson5);
    if (name == "p9") return make_problem(ProblemFamily::Poisson9);
    if (name == "pm") return make_problem(ProblemFamily::Mehrstellen);
    if (name == "aniso2") return make_problem(ProblemFamily::Anisotropic, 2.0);
    if (name == "aniso10") return make_problem(ProblemFamily::Anisotropic, 10.0);
    if (name == "mixed14") return make_problem(ProblemFamily::Mixed, 0.0, 0.25);
    if (name == "mixed34") return make_problem(ProblemFamily::Mixed, 0.0, 0.75);
    throw std::invalid_argument("unknown problem name: " + name);
}

const std::vector<std::string>& problem_names() {
    static const std::vector<std::string> names = {"p5",      "p9",      "pm",     "aniso2",
                                                   "aniso10", "mixed14", "mixed34"};
    return names;
}

GridField apply_fine_operator(const ProblemSpec& spec, const GridField& x) {
    return conv_same(x, spec.stencil);
}

}  // namespace convmg
