// Feeds one simulated stream through the four detectors and prints when
// each one alarms. Bad change (fB) starts at t = 200 in the scenario-3
// preset, where neither single CuSum is reliable.

#include <cmath>
#include <cstdio>
#include <vector>

#include "qcd/qcd.hpp"

int main() {
    const auto m = qcd::scenario_preset(3);
    const double b = std::log(1000.0);
    auto stream = qcd::make_stream(m.f0, m.fb, 200, qcd::SeedKey{42, 0, 0});
    std::vector<double> xs(5000);
    for (auto& x : xs) {
        x = stream.next();
    }

    for (auto kind : qcd::kAllDetectors) {
        qcd::Detector detector({kind, m.f0, m.fc, m.fb, b, b});
        std::uint64_t t = 0;
        for (double x : xs) {
            ++t;
            if (detector.observe(x)) {
                break;
            }
        }
        const auto& s = detector.state();
        if (s.alarm_time) {
            std::printf("%-13s alarm at t=%llu\n", std::string(qcd::to_string(kind)).c_str(),
                        static_cast<unsigned long long>(*s.alarm_time));
        } else {
            std::printf("%-13s no alarm in %zu samples\n", std::string(qcd::to_string(kind)).c_str(), xs.size());
        }
    }
    return 0;
}
