//! Static listing of the built-in law families.

pub const LISTING: &str = "\
offspring families
  stable        f(s) = c(1-s)^(1+nu) (1 + kappa (1-s)^nu), truncated at J and rebalanced
                nu in (0,1), c > 0, kappa >= 0, truncation >= 2 (default 2000)
                conditions: [f_nu] [L_nu]; slowly varying part constant(c) or perturbed(c,kappa,nu)
                kappa > 0 with nu > 1/2 is rejected when a truncated coefficient turns negative
  coefficients  f(s) = sum_j a_j s^j from an explicit list, with declared nu in (0,1)
                conditions: a_0 > 0, a_1 < 0, a_j >= 0 otherwise, sum a_j = 0, sum j a_j = 0
                no closed form; tail conditions are not verified

immigration families
  stable        g(s) = -d(1-s)^delta (1 + kappa (1-s)^delta), truncated at J and rebalanced
                delta in (0,1), d > 0, kappa >= 0, truncation >= 2 (default 2000)
                conditions: [g_delta] [l_delta]; slowly varying part constant(d) or perturbed(d,kappa,delta)
  coefficients  g(s) = sum_j b_j s^j from an explicit list, with declared delta in (0,1)
                conditions: b_0 < 0, b_j >= 0 otherwise, sum b_j = 0

slowly varying specs
  constant(c)                    L(x) = c
  perturbed(c,kappa,exponent)    L(x) = c (1 + kappa x^-exponent)
  log                            L(x) = 1 + ln x, declared remainder x^-1/2 (negative tests)

pairings (gamma = delta - nu, mu = 2 delta - nu)
  gamma > 0     invariant distribution U; tasks: invariant, rates (theorem1), lemmas 1-4
  gamma < 0     invariant measure pi; requires mu > 0 and C_L = |gamma|
                theorem2-ready stable pairing: delta < nu < 2 delta and d/c = nu - delta
                tasks: invariant, rates (theorem2, corollary1), lemmas 1-3
  gamma = 0     rejected
";
