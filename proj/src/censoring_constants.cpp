#include "survregime/errors.hpp"
#include "survregime/simulation.hpp"

#include <fmt/format.h>

namespace survregime {

// Upper bounds of the uniform censoring law, found by bisection on 10^5
// subjects (see `survregime calibrate`).

namespace {

double pick(double rate, double c15, double c40) {
  if (rate == 0.15) return c15;
  if (rate == 0.40) return c40;
  throw Error(ErrorCode::validation, fmt::format("no censoring constant for rate {}", rate));
}

}  // namespace

double censoring_constant(ErrorDist error, double rate) {
  if (error == ErrorDist::extreme_value) return pick(rate, 14.0534, 5.3284);
  return pick(rate, 17.6993, 6.6164);
}

double censoring_constant(int scenario, double rate) {
  switch (scenario) {
    case 1: return pick(rate, 19.1439, 4.5223);
    case 2: return pick(rate, 72.4220, 12.0343);
    case 3: return pick(rate, 33.9706, 8.9552);
  }
  throw Error(ErrorCode::validation, fmt::format("unknown scenario {}", scenario));
}

}  // namespace survregime
