#pragma once

#include <array>
#include <string_view>

namespace expflow {

// Built-in schemes in the tableau text format (see parse_tableau). Each one
// passes through the validation gates when the registry is built.

inline constexpr std::string_view kTableauExpEuler = R"(# exponential Euler method
name: expeuler
family: exprk
stages: 1
order: 1
citation: classical exponential Euler
c: 0
b 1: [(1, 1)]
)";

inline constexpr std::string_view kTableauStrehmelWeiner1 = R"(# two-stage family with c2 = 1/2, weights b2 = phi2/c2
name: strehmelweiner1
family: exprk
stages: 2
order: 2
citation: K. Strehmel, R. Weiner, Linear-implizite Runge-Kutta-Methoden und ihre Anwendung, Teubner 1992, Example 4.2.2
c: 0, 1/2
a 2 1: [(1, 1/2)] scale 1/2
b 1: [(1, 1), (2, -2)]
b 2: [(2, 2)]
)";

inline constexpr std::string_view kTableauStrehmelWeiner2 = R"(# two-stage family with c2 = 1/2, weights b2 = phi1/(2 c2)
name: strehmelweiner2
family: exprk
stages: 2
order: 2
citation: K. Strehmel, R. Weiner, Linear-implizite Runge-Kutta-Methoden und ihre Anwendung, Teubner 1992, Example 4.2.2
c: 0, 1/2
a 2 1: [(1, 1/2)] scale 1/2
b 2: [(1, 1)]
)";

inline constexpr std::string_view kTableauHochOst3a = R"(# three stages, c = (0, 1/3, 2/3), b2 = 0
name: hochost3a
family: exprk
stages: 3
order: 3
citation: M. Hochbruck, A. Ostermann, Explicit exponential Runge-Kutta methods for semilinear parabolic problems, SIAM J. Numer. Anal. 43 (2005), eq. (5.8)
c: 0, 1/3, 2/3
a 2 1: [(1, 1/3)] scale 1/3
a 3 1: [(1, 2/3), (2, -4/3)] scale 2/3
a 3 2: [(2, 4/3)] scale 2/3
b 1: [(1, 1), (2, -3/2)]
b 3: [(2, 3/2)]
)";

inline constexpr std::string_view kTableauHochOst3b = R"(# three stages, c = (0, 1/2, 1)
# coefficients reconstructed from the stiff order-3 conditions for these nodes
name: hochost3b
family: exprk
stages: 3
order: 3
citation: M. Hochbruck, A. Ostermann, Explicit exponential Runge-Kutta methods for semilinear parabolic problems, SIAM J. Numer. Anal. 43 (2005), eq. (5.9)
c: 0, 1/2, 1
a 2 1: [(1, 1/2)] scale 1/2
a 3 1: [(1, 1), (2, -4)]
a 3 2: [(2, 4)]
b 1: [(1, 1), (2, -3), (3, 4)]
b 2: [(2, 4), (3, -8)]
b 3: [(2, -1), (3, 4)]
)";

inline constexpr std::string_view kTableauEtd4rk = R"(# ETD4RK; a41 = phi1(z) - phi1(z/2) equals (1/2) phi1(z/2) (e^(z/2) - 1)
name: etd4rk
family: exprk
stages: 4
order: 4
citation: S. M. Cox, P. C. Matthews, Exponential time differencing for stiff systems, J. Comput. Phys. 176 (2002)
c: 0, 1/2, 1/2, 1
a 2 1: [(1, 1/2)] scale 1/2
a 3 2: [(1, 1/2)] scale 1/2
a 4 1: [(1, 1), (1, -1, 1/2)]
a 4 3: [(1, 1)] scale 1/2
b 1: [(1, 1), (2, -3), (3, 4)]
b 2: [(2, 2), (3, -4)]
b 3: [(2, 2), (3, -4)]
b 4: [(2, -1), (3, 4)]
)";

inline constexpr std::string_view kTableauKrogstad = R"(# ETD4RK-B
name: krogstad
family: exprk
stages: 4
order: 4
citation: S. Krogstad, Generalized integrating factor methods for stiff PDEs, J. Comput. Phys. 203 (2005)
c: 0, 1/2, 1/2, 1
a 2 1: [(1, 1/2)] scale 1/2
a 3 1: [(1, 1/2), (2, -1)] scale 1/2
a 3 2: [(2, 1)] scale 1/2
a 4 1: [(1, 1), (2, -2)]
a 4 3: [(2, 2)]
b 1: [(1, 1), (2, -3), (3, 4)]
b 2: [(2, 2), (3, -4)]
b 3: [(2, 2), (3, -4)]
b 4: [(2, -1), (3, 4)]
)";

inline constexpr std::string_view kTableauHochOst5 = R"(# five stages, stiff order four; phi_{k,i} = phi_k(c_i z)
name: hochost5
family: exprk
stages: 5
order: 4
citation: M. Hochbruck, A. Ostermann, Explicit exponential Runge-Kutta methods for semilinear parabolic problems, SIAM J. Numer. Anal. 43 (2005), eq. (5.19)
c: 0, 1/2, 1/2, 1, 1/2
a 2 1: [(1, 1/2)] scale 1/2
a 3 1: [(1, 1/2), (2, -1)] scale 1/2
a 3 2: [(2, 1)] scale 1/2
a 4 1: [(1, 1), (2, -2)]
a 4 2: [(2, 1)]
a 4 3: [(2, 1)]
a 5 1: [(1, 1/2), (2, -3/4), (3, 1/2), (2, -1/4, 1), (3, 1, 1)] scale 1/2
a 5 2: [(2, 1/2), (3, -1/2), (2, 1/4, 1), (3, -1, 1)] scale 1/2
a 5 3: [(2, 1/2), (3, -1/2), (2, 1/4, 1), (3, -1, 1)] scale 1/2
a 5 4: [(2, -1/4), (3, 1/2), (2, -1/4, 1), (3, 1, 1)] scale 1/2
b 1: [(1, 1), (2, -3), (3, 4)]
b 4: [(2, -1), (3, 4)]
b 5: [(2, 4), (3, -8)]
)";

inline constexpr std::string_view kTableauExprb2 = R"(# exponential Rosenbrock-Euler
name: exprb2
family: exprb
stages: 1
order: 2
citation: M. Hochbruck, A. Ostermann, J. Schweitzer, Exponential Rosenbrock-type methods, SIAM J. Numer. Anal. 47 (2009)
c: 0
b 1: [(1, 1)]
)";

inline constexpr std::string_view kTableauExprb3 = R"(# second stage is an exponential Euler predictor
name: exprb3
family: exprb
stages: 2
order: 3
citation: M. Hochbruck, A. Ostermann, J. Schweitzer, Exponential Rosenbrock-type methods, SIAM J. Numer. Anal. 47 (2009), section 5.1
c: 0, 1
a 2 1: [(1, 1)]
b 1: [(1, 1), (3, -2)]
b 2: [(3, 2)]
embedded 0: order 2 label exponential Rosenbrock-Euler
bhat 0 1: [(1, 1)]
)";

inline constexpr std::string_view kTableauExprb4 = R"(# three stages, c = (0, 1/2, 1)
name: exprb4
family: exprb
stages: 3
order: 4
citation: M. Hochbruck, A. Ostermann, J. Schweitzer, Exponential Rosenbrock-type methods, SIAM J. Numer. Anal. 47 (2009), section 5.1
c: 0, 1/2, 1
a 2 1: [(1, 1/2)] scale 1/2
a 3 2: [(1, 1)]
b 1: [(1, 1), (3, -14), (4, 36)]
b 2: [(3, 16), (4, -48)]
b 3: [(3, -2), (4, 12)]
embedded 0: order 3 label third-order weights with all three stages
bhat 0 1: [(1, 1), (3, -14)]
bhat 0 2: [(3, 16)]
bhat 0 3: [(3, -2)]
embedded 1: order 3 label third-order weights on the first two stages
bhat 1 1: [(1, 1), (3, -8)]
bhat 1 2: [(3, 8)]
)";

inline constexpr std::array<std::string_view, 11> builtin_tableau_texts() {
  return {kTableauExpEuler, kTableauStrehmelWeiner1, kTableauStrehmelWeiner2, kTableauHochOst3a,
          kTableauHochOst3b, kTableauEtd4rk,          kTableauKrogstad,        kTableauHochOst5,
          kTableauExprb2,    kTableauExprb3,          kTableauExprb4};
}

}  // namespace expflow
