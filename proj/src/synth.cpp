#include "gasf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "gasf/dataset.hpp"
#include "gasf/rng.hpp"

namespace gasf {

namespace {

std::string num(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

constexpr double kPi = 3.14159265358979323846;

}  // namespace

SynthCsvs generate_synthetic(const SynthParams& p) {
    if (p.months < 24) throw DataError("synthetic generation requires months >= 24");
    if (p.cities < 1) throw DataError("synthetic generation requires at least one city");

    Rng rng(p.seed);
    std::ostringstream cons, wx;
    cons << "date,city,usage_m3\n";
    wx << "date,city";
    for (const auto& n : weather_field_names()) wx << ',' << n;
    wx << '\n';

    for (int c = 0; c < p.cities; ++c) {
        const std::string city = "city_" + std::string(1, char('a' + c % 26)) +
                                 (c >= 26 ? std::to_string(c / 26) : "");
        // Higher index = higher altitude = colder and wetter.
        const double altitude = 2.0 * c + rng.uniform(0.0, 1.5);
        const double base = p.base_usage * (1.0 + 0.15 * c + rng.uniform(0.0, 0.1));
        const double amplitude = 12.0 + rng.uniform(-1.0, 1.0);

        for (int m = 0; m < p.months; ++m) {
            const Date date = p.start.add_months(m);
            const double phase = 2.0 * kPi * double(date.month - 1) / 12.0;
            const double mean_t = 14.0 - altitude - amplitude * std::cos(phase) +
                                  rng.uniform(-1.5, 1.5);
            const double max_t = mean_t + 6.0 + rng.uniform(0.0, 2.0);
            const double min_t = mean_t - 6.0 - rng.uniform(0.0, 2.0);
            const double max_abs_t = max_t + 3.0 + rng.uniform(0.0, 2.0);
            const double min_abs_t = min_t - 3.0 - rng.uniform(0.0, 2.0);

            const double mean_rh = std::clamp(55.0 + 15.0 * std::cos(phase) +
                                                  rng.uniform(-5.0, 5.0),
                                              5.0, 95.0);
            const double max_rh = std::min(100.0, mean_rh + 15.0 + rng.uniform(0.0, 5.0));
            const double min_rh = std::max(0.0, mean_rh - 15.0 - rng.uniform(0.0, 5.0));
            const double rain = std::max(0.0, 30.0 + 25.0 * std::cos(phase) +
                                                  rng.uniform(-15.0, 15.0));
            // Independent jitter keeps freezing days from being a pure
            // function of min_temp, so freezing-driven usage is attributable
            // to this column and not its temperature proxies.
            const double freezing = std::clamp(
                std::round(std::max(0.0, -min_t) * 2.2 + rng.uniform(-4.0, 4.0)), 0.0, 31.0);

            double usage;
            const double noise = 1.0 + rng.uniform(-p.noise_frac, p.noise_frac);
            if (p.freezing_driven) {
                usage = (p.base_usage + 3.0e5 * freezing) * noise;
            } else {
                const double heating =
                    p.heating_coeff * std::max(0.0, p.heating_threshold - mean_t);
                usage = (base + heating) * noise;
            }

            cons << date.to_string() << ',' << city << ',' << num(usage, 3) << '\n';
            wx << date.to_string() << ',' << city << ',' << num(mean_rh, 2) << ','
               << num(max_rh, 2) << ',' << num(min_rh, 2) << ',' << num(mean_t, 2) << ','
               << num(max_t, 2) << ',' << num(min_t, 2) << ',' << num(max_abs_t, 2) << ','
               << num(min_abs_t, 2) << ',' << num(rain, 2) << ',' << num(freezing, 0) << '\n';
        }
    }
    return {cons.str(), wx.str()};
}

}  // namespace gasf
