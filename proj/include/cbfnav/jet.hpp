#pragma once

// Forward-mode differentiation scalars.
//
// Dual<N>  : value plus N independent first-order partials.
// Jet<S>   : truncated Taylor series in one expansion variable with
//            coefficients in S.  S may be double, Dual<N>, or another
//            Jet, so mixed partials come from nesting.
//
// Binary ops between jets of different degree read the missing
// coefficients of the shorter operand as zero, i.e. the shorter operand
// is taken to be an exact polynomial.  Code that mixes two genuinely
// truncated series must align degrees explicitly (see truncated()).

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <type_traits>

namespace cbfnav {

inline constexpr int kMaxJetOrder = 8;

inline double value_of(double x) { return x; }

/* ---------------------------------------------------------------- Dual */

template <int N>
struct Dual {
  double v{0.0};
  std::array<double, N> d{};

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT: implicit by design

  static Dual seeded(double value, int slot) {
    Dual r(value);
    r.d[slot] = 1.0;
    return r;
  }
};

template <int N>
double value_of(const Dual<N>& x) {
  return x.v;
}

template <int N>
Dual<N> operator-(const Dual<N>& a) {
  Dual<N> r(-a.v);
  for (int i = 0; i < N; ++i) r.d[i] = -a.d[i];
  return r;
}

template <int N>
Dual<N> operator+(const Dual<N>& a, const Dual<N>& b) {
  Dual<N> r(a.v + b.v);
  for (int i = 0; i < N; ++i) r.d[i] = a.d[i] + b.d[i];
  return r;
}

template <int N>
Dual<N> operator-(const Dual<N>& a, const Dual<N>& b) {
  Dual<N> r(a.v - b.v);
  for (int i = 0; i < N; ++i) r.d[i] = a.d[i] - b.d[i];
  return r;
}

template <int N>
Dual<N> operator*(const Dual<N>& a, const Dual<N>& b) {
  Dual<N> r(a.v * b.v);
  for (int i = 0; i < N; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
  return r;
}

template <int N>
Dual<N> operator/(const Dual<N>& a, const Dual<N>& b) {
  Dual<N> r(a.v / b.v);
  const double inv = 1.0 / b.v;
  for (int i = 0; i < N; ++i) r.d[i] = (a.d[i] - r.v * b.d[i]) * inv;
  return r;
}

template <int N> Dual<N> operator+(const Dual<N>& a, double b) { Dual<N> r = a; r.v += b; return r; }
template <int N> Dual<N> operator+(double a, const Dual<N>& b) { return b + a; }
template <int N> Dual<N> operator-(const Dual<N>& a, double b) { Dual<N> r = a; r.v -= b; return r; }
template <int N> Dual<N> operator-(double a, const Dual<N>& b) { return -(b - a); }

template <int N>
Dual<N> operator*(const Dual<N>& a, double b) {
  Dual<N> r(a.v * b);
  for (int i = 0; i < N; ++i) r.d[i] = a.d[i] * b;
  return r;
}
template <int N> Dual<N> operator*(double a, const Dual<N>& b) { return b * a; }
template <int N> Dual<N> operator/(const Dual<N>& a, double b) { return a * (1.0 / b); }
template <int N> Dual<N> operator/(double a, const Dual<N>& b) { return Dual<N>(a) / b; }

template <int N>
Dual<N>& operator+=(Dual<N>& a, const Dual<N>& b) { a = a + b; return a; }
template <int N>
Dual<N>& operator-=(Dual<N>& a, const Dual<N>& b) { a = a - b; return a; }
template <int N>
Dual<N>& operator*=(Dual<N>& a, const Dual<N>& b) { a = a * b; return a; }

template <int N>
Dual<N> exp(const Dual<N>& a) {
  Dual<N> r(std::exp(a.v));
  for (int i = 0; i < N; ++i) r.d[i] = r.v * a.d[i];
  return r;
}

template <int N>
Dual<N> log(const Dual<N>& a) {
  Dual<N> r(std::log(a.v));
  const double inv = 1.0 / a.v;
  for (int i = 0; i < N; ++i) r.d[i] = a.d[i] * inv;
  return r;
}

template <int N>
Dual<N> sqrt(const Dual<N>& a) {
  Dual<N> r(std::sqrt(a.v));
  const double half_inv = 0.5 / r.v;
  for (int i = 0; i < N; ++i) r.d[i] = a.d[i] * half_inv;
  return r;
}

template <int N>
Dual<N> sin(const Dual<N>& a) {
  Dual<N> r(std::sin(a.v));
  const double c = std::cos(a.v);
  for (int i = 0; i < N; ++i) r.d[i] = c * a.d[i];
  return r;
}

template <int N>
Dual<N> cos(const Dual<N>& a) {
  Dual<N> r(std::cos(a.v));
  const double s = std::sin(a.v);
  for (int i = 0; i < N; ++i) r.d[i] = -s * a.d[i];
  return r;
}

template <int N>
Dual<N> atan2(const Dual<N>& y, const Dual<N>& x) {
  Dual<N> r(std::atan2(y.v, x.v));
  const double inv = 1.0 / (x.v * x.v + y.v * y.v);
  for (int i = 0; i < N; ++i) r.d[i] = (x.v * y.d[i] - y.v * x.d[i]) * inv;
  return r;
}

/* ----------------------------------------------------------------- Jet */

template <class S>
struct Jet {
  int deg{0};
  std::array<S, kMaxJetOrder + 1> c{};

  Jet() = default;

  Jet(const S& value, int degree) : deg(degree) { c[0] = value; }

  // The expansion variable itself: value + s.
  static Jet variable(const S& value, int degree) {
    Jet r(value, degree);
    if (degree >= 1) r.c[1] = S(1.0);
    return r;
  }

  const S& value() const { return c[0]; }

  Jet truncated(int degree) const {
    Jet r;
    r.deg = degree;
    for (int j = 0; j <= degree; ++j) r.c[j] = (j <= deg) ? c[j] : S{};
    return r;
  }

  // Formal d/ds; drops one degree.
  Jet derivative() const {
    Jet r;
    r.deg = deg - 1;
    for (int j = 0; j < deg; ++j) r.c[j] = c[j + 1] * double(j + 1);
    return r;
  }
};

template <class S>
double value_of(const Jet<S>& x) {
  return value_of(x.c[0]);
}

inline double zero_like(double) { return 0.0; }
template <int N>
Dual<N> zero_like(const Dual<N>&) {
  return Dual<N>{};
}
template <class S>
Jet<S> zero_like(const Jet<S>& proto) {
  return Jet<S>(S{}, proto.deg);
}

// Scalar constant promoted to the shape of `proto`.
inline double constant_like(double, double v) { return v; }
template <int N>
Dual<N> constant_like(const Dual<N>&, double v) { return Dual<N>(v); }
template <class S>
Jet<S> constant_like(const Jet<S>& proto, double v) {
  return Jet<S>(constant_like(proto.c[0], v), proto.deg);
}

template <class S>
Jet<S> operator-(const Jet<S>& a) {
  Jet<S> r;
  r.deg = a.deg;
  for (int j = 0; j <= a.deg; ++j) r.c[j] = -a.c[j];
  return r;
}

template <class S>
Jet<S> operator+(const Jet<S>& a, const Jet<S>& b) {
  Jet<S> r;
  r.deg = a.deg > b.deg ? a.deg : b.deg;
  for (int j = 0; j <= r.deg; ++j) {
    if (j <= a.deg && j <= b.deg) r.c[j] = a.c[j] + b.c[j];
    else if (j <= a.deg)          r.c[j] = a.c[j];
    else                          r.c[j] = b.c[j];
  }
  return r;
}

template <class S>
Jet<S> operator-(const Jet<S>& a, const Jet<S>& b) {
  return a + (-b);
}

template <class S>
Jet<S> operator*(const Jet<S>& a, const Jet<S>& b) {
  Jet<S> r;
  r.deg = a.deg > b.deg ? a.deg : b.deg;
  for (int j = 0; j <= r.deg; ++j) {
    S acc{};
    const int lo = j - b.deg > 0 ? j - b.deg : 0;
    const int hi = j < a.deg ? j : a.deg;
    for (int i = lo; i <= hi; ++i) acc += a.c[i] * b.c[j - i];
    r.c[j] = acc;
  }
  return r;
}

template <class S>
Jet<S> operator/(const Jet<S>& n, const Jet<S>& d) {
  Jet<S> r;
  r.deg = n.deg > d.deg ? n.deg : d.deg;
  for (int j = 0; j <= r.deg; ++j) {
    S acc = (j <= n.deg) ? n.c[j] : S{};
    const int lo = j - d.deg > 0 ? j - d.deg : 0;
    for (int i = lo; i < j; ++i) acc -= r.c[i] * d.c[j - i];
    r.c[j] = acc / d.c[0];
  }
  return r;
}

template <class S> Jet<S> operator+(const Jet<S>& a, double b) { Jet<S> r = a; r.c[0] = r.c[0] + b; return r; }
template <class S> Jet<S> operator+(double a, const Jet<S>& b) { return b + a; }
template <class S> Jet<S> operator-(const Jet<S>& a, double b) { return a + (-b); }
template <class S> Jet<S> operator-(double a, const Jet<S>& b) { return -(b - a); }

template <class S>
Jet<S> operator*(const Jet<S>& a, double b) {
  Jet<S> r;
  r.deg = a.deg;
  for (int j = 0; j <= a.deg; ++j) r.c[j] = a.c[j] * b;
  return r;
}
template <class S> Jet<S> operator*(double a, const Jet<S>& b) { return b * a; }
template <class S> Jet<S> operator/(const Jet<S>& a, double b) { return a * (1.0 / b); }

// Coefficient-scalar mixed forms; disabled for S = double where the
// overloads above already cover them.
template <class S>
  requires(!std::is_same_v<S, double>)
Jet<S> operator+(const Jet<S>& a, const S& b) { Jet<S> r = a; r.c[0] = r.c[0] + b; return r; }
template <class S>
  requires(!std::is_same_v<S, double>)
Jet<S> operator-(const Jet<S>& a, const S& b) { Jet<S> r = a; r.c[0] = r.c[0] - b; return r; }
template <class S>
  requires(!std::is_same_v<S, double>)
Jet<S> operator-(const S& a, const Jet<S>& b) { return -(b - a); }

template <class S>
  requires(!std::is_same_v<S, double>)
Jet<S> operator*(const Jet<S>& a, const S& b) {
  Jet<S> r;
  r.deg = a.deg;
  for (int j = 0; j <= a.deg; ++j) r.c[j] = a.c[j] * b;
  return r;
}
template <class S>
  requires(!std::is_same_v<S, double>)
Jet<S> operator*(const S& a, const Jet<S>& b) { return b * a; }

template <class S>
Jet<S>& operator+=(Jet<S>& a, const Jet<S>& b) { a = a + b; return a; }
template <class S>
Jet<S>& operator-=(Jet<S>& a, const Jet<S>& b) { a = a - b; return a; }

template <class S>
Jet<S> exp(const Jet<S>& a) {
  Jet<S> r;
  r.deg = a.deg;
  using std::exp;
  r.c[0] = exp(a.c[0]);
  for (int j = 1; j <= a.deg; ++j) {
    S acc{};
    for (int i = 1; i <= j; ++i) acc += a.c[i] * r.c[j - i] * double(i);
    r.c[j] = acc / double(j);
  }
  return r;
}

template <class S>
Jet<S> log(const Jet<S>& a) {
  Jet<S> r;
  r.deg = a.deg;
  using std::log;
  r.c[0] = log(a.c[0]);
  for (int j = 1; j <= a.deg; ++j) {
    S acc = a.c[j] * double(j);
    for (int i = 1; i < j; ++i) acc -= r.c[i] * a.c[j - i] * double(i);
    r.c[j] = (acc / double(j)) / a.c[0];
  }
  return r;
}

template <class S>
Jet<S> sqrt(const Jet<S>& a) {
  Jet<S> r;
  r.deg = a.deg;
  using std::sqrt;
  r.c[0] = sqrt(a.c[0]);
  for (int j = 1; j <= a.deg; ++j) {
    S acc = a.c[j];
    for (int i = 1; i < j; ++i) acc -= r.c[i] * r.c[j - i];
    r.c[j] = acc / (r.c[0] * 2.0);
  }
  return r;
}

// sin and cos share the joint recurrence; sincos computes both at once.
template <class S>
void sincos(const Jet<S>& a, Jet<S>& s, Jet<S>& c) {
  s.deg = a.deg;
  c.deg = a.deg;
  using std::cos;
  using std::sin;
  s.c[0] = sin(a.c[0]);
  c.c[0] = cos(a.c[0]);
  for (int j = 1; j <= a.deg; ++j) {
    S sa{};
    S ca{};
    for (int i = 1; i <= j; ++i) {
      sa += a.c[i] * c.c[j - i] * double(i);
      ca += a.c[i] * s.c[j - i] * double(i);
    }
    s.c[j] = sa / double(j);
    c.c[j] = -(ca / double(j));
  }
}

template <class S>
Jet<S> sin(const Jet<S>& a) {
  Jet<S> s, c;
  sincos(a, s, c);
  return s;
}

template <class S>
Jet<S> cos(const Jet<S>& a) {
  Jet<S> s, c;
  sincos(a, s, c);
  return c;
}

template <class S>
Jet<S> atan2(const Jet<S>& y, const Jet<S>& x) {
  const int deg = x.deg > y.deg ? x.deg : y.deg;
  Jet<S> r;
  r.deg = deg;
  using std::atan2;
  r.c[0] = atan2(y.c[0], x.c[0]);
  if (deg == 0) return r;
  // theta' = (x y' - y x') / (x^2 + y^2), integrated termwise.
  const Jet<S> xt = x.truncated(deg);
  const Jet<S> yt = y.truncated(deg);
  const Jet<S> num = (xt.truncated(deg - 1) * yt.derivative() -
                      yt.truncated(deg - 1) * xt.derivative());
  const Jet<S> den = (xt * xt + yt * yt).truncated(deg - 1);
  const Jet<S> q = num / den;
  for (int j = 1; j <= deg; ++j) r.c[j] = q.c[j - 1] / double(j);
  return r;
}

/* --------------------------------------------------- flow expansion */

// Taylor coefficients of the flow of x' = field(x) from x0.  Iterated
// time derivatives of any scalar function along the flow fall out of
// evaluating it on the result with Jet arithmetic.
template <class S, std::size_t N, class Field>
std::array<Jet<S>, N> flow_series(const std::array<S, N>& x0, Field&& field, int deg) {
  if (deg < 0 || deg > kMaxJetOrder) throw std::invalid_argument("flow_series: bad degree");
  std::array<Jet<S>, N> y;
  for (std::size_t i = 0; i < N; ++i) y[i] = Jet<S>(x0[i], deg);
  for (int level = 0; level < deg; ++level) {
    const std::array<Jet<S>, N> f = field(y);
    for (std::size_t i = 0; i < N; ++i) y[i].c[level + 1] = f[i].c[level] / double(level + 1);
  }
  return y;
}

}  // namespace cbfnav
