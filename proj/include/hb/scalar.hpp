#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <type_traits>

#include <boost/multiprecision/cpp_int.hpp>

#include "hb/error.hpp"

namespace hb {

using Rational = boost::multiprecision::cpp_rational;

/// Arithmetic glue so tree algorithms run unchanged over `double` and exact rationals.
template <class S>
struct ScalarTraits;

template <>
struct ScalarTraits<double> {
  static constexpr bool exact = false;
  static constexpr const char* name = "float";
  static double from_double(double v) { return v; }
  static double to_double(double v) { return v; }
  static double from_int(std::int64_t v) { return static_cast<double>(v); }
  static double from_decimal(std::string_view text);
};

template <>
struct ScalarTraits<Rational> {
  static constexpr bool exact = true;
  static constexpr const char* name = "rational";
  static Rational from_double(double v) { return Rational(v); }
  static double to_double(const Rational& v) { return v.convert_to<double>(); }
  static Rational from_int(std::int64_t v) { return Rational(v); }
  static Rational from_decimal(std::string_view text);
};

template <class S>
inline constexpr bool is_exact_v = ScalarTraits<S>::exact;

template <class S>
S abs_value(const S& v) {
  return v < S(0) ? S(-v) : v;
}

template <class S>
double to_double(const S& v) {
  return ScalarTraits<S>::to_double(v);
}

template <class S>
S from_double(double v) {
  return ScalarTraits<S>::from_double(v);
}

// a <= b, with an absolute slack of `tol` in floating point. Exact types ignore tol.
template <class S>
bool leq(const S& a, const S& b, double tol) {
  if constexpr (is_exact_v<S>) {
    return a <= b;
  } else {
    return a <= b + tol;
  }
}

template <class S>
bool near(const S& a, const S& b, double tol) {
  return leq(a, b, tol) && leq(b, a, tol);
}

namespace detail {

// Splits "[-+]digits[.digits][e[-+]digits]" or "p/q"; throws ParseError on anything else.
struct DecimalParts {
  bool negative = false;
  std::string digits;  // integer and fraction digits concatenated
  std::int64_t exponent = 0;  // value = digits * 10^exponent
};

inline DecimalParts split_decimal(std::string_view text) {
  DecimalParts out;
  std::size_t i = 0;
  if (i < text.size() && (text[i] == '-' || text[i] == '+')) {
    out.negative = text[i] == '-';
    ++i;
  }
  bool any = false;
  while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
    out.digits.push_back(text[i++]);
    any = true;
  }
  if (i < text.size() && text[i] == '.') {
    ++i;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
      out.digits.push_back(text[i++]);
      --out.exponent;
      any = true;
    }
  }
  if (!any) throw ParseError("not a decimal number: '" + std::string(text) + "'");
  if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
    ++i;
    bool neg = false;
    if (i < text.size() && (text[i] == '-' || text[i] == '+')) neg = text[i++] == '-';
    std::int64_t e = 0;
    bool edigits = false;
    while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
      e = e * 10 + (text[i++] - '0');
      edigits = true;
      if (e > 4000) throw ParseError("exponent out of range: '" + std::string(text) + "'");
    }
    if (!edigits) throw ParseError("malformed exponent: '" + std::string(text) + "'");
    out.exponent += neg ? -e : e;
  }
  if (i != text.size()) throw ParseError("trailing characters in number: '" + std::string(text) + "'");
  return out;
}

}  // namespace detail

inline double ScalarTraits<double>::from_decimal(std::string_view text) {
  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    return from_decimal(text.substr(0, slash)) / from_decimal(text.substr(slash + 1));
  }
  detail::split_decimal(text);  // validates the syntax
  return std::stod(std::string(text));
}

inline Rational ScalarTraits<Rational>::from_decimal(std::string_view text) {
  using boost::multiprecision::cpp_int;
  if (auto slash = text.find('/'); slash != std::string_view::npos) {
    Rational den = from_decimal(text.substr(slash + 1));
    if (den == 0) throw ParseError("zero denominator: '" + std::string(text) + "'");
    return from_decimal(text.substr(0, slash)) / den;
  }
  auto parts = detail::split_decimal(text);
  // cpp_int reads a leading zero as an octal prefix
  auto first = parts.digits.find_first_not_of('0');
  cpp_int mant(first == std::string::npos ? std::string("0") : parts.digits.substr(first));
  cpp_int scale = boost::multiprecision::pow(cpp_int(10), static_cast<unsigned>(std::abs(parts.exponent)));
  Rational value = parts.exponent >= 0 ? Rational(mant * scale) : Rational(mant, scale);
  return parts.negative ? Rational(-value) : value;
}

}  // namespace hb
