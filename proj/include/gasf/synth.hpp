#pragma once

#include <cstdint>
#include <string>

#include "gasf/date.hpp"

namespace gasf {

// Desk-scale synthetic scenario: seasonal temperatures with a per-city
// altitude offset, freezing days derived from sub-zero minima, and usage
// driven by a cold-month heating term on top of a base load.
struct SynthParams {
    int cities = 5;
    int months = 72;
    Date start{2017, 1, 1};
    double base_usage = 2.0e6;      // m^3/month of non-heating load
    double heating_coeff = 4.0e5;   // m^3 per degree below the heating threshold
    double heating_threshold = 15.0;
    double noise_frac = 0.02;       // relative usage noise
    bool freezing_driven = false;   // usage becomes a function of freezing days only
    std::uint64_t seed = 1;
};

struct SynthCsvs {
    std::string consumption_csv;
    std::string weather_csv;
};

SynthCsvs generate_synthetic(const SynthParams& params);

}  // namespace gasf
