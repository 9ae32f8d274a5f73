#pragma once

#include <stdexcept>
#include <string>

namespace cind {

enum class Errc {
  NegativeEntry,
  SumNotOne,
  NotFinite,
  BadAxis,
  ShapeMismatch,
  InvalidCoupling,
  NotStochastic,
  EmptySupport,
  NotBlock,
  IsBlock,
  NotRMatrix,
  DegeneratePositivity,
  TooLarge,
  NotIndependent,
  BadMap,
  OrderDecrease,
  BadN,
  OutOfRange,
  NotDyadic,
  SingularM,
  NonzeroSum,
  ZeroEntry,
  NoConvergence,
  RowColNotRank1,
  MassMismatch,
  OrderCapExceeded,
  NegativeRate,
  EpsOutOfRange,
  ParseError,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace cind
