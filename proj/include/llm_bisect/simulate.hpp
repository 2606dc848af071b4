// Copyright 2026 The llm-bisect Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <string>

#include "llm_bisect/bisect.hpp"
#include "llm_bisect/error.hpp"
#include "llm_bisect/util.hpp"

namespace llm_bisect {

struct SimulationConfig {
  std::size_t sessions = 1000;
  std::size_t interior = 31;  // commits strictly between the endpoints
  double flip_probability = 0.1;
  std::size_t region_width = 5;  // flaky commits centred on the fault
  std::uint64_t seed = 1;
  RobustPolicy policy;

  void validate() const {
    if (sessions == 0) fail(ErrorClass::Usage, "sessions must be positive");
    if (interior == 0) fail(ErrorClass::Usage, "interior must be positive");
    if (!(flip_probability >= 0.0 && flip_probability <= 1.0))
      fail(ErrorClass::Usage, "flip probability must lie in [0, 1]");
  }
};

/// Monotone truth with first-bad index `fault`; inside the flaky region each
/// query independently returns the wrong mark with probability p.
class NoisyOracle {
 public:
  NoisyOracle(std::size_t fault, std::size_t region_lo, std::size_t region_hi, double p,
              std::uint64_t seed)
      : fault_(fault), lo_(region_lo), hi_(region_hi), p_(p), rng_(seed) {}

  Verdict operator()(std::size_t index) {
    bool bad = index >= fault_;
    if (index >= lo_ && index <= hi_ && p_ > 0.0 && rng_.uniform() < p_) bad = !bad;
    return bad ? Verdict::bad(0.9) : Verdict::good(0.9);
  }

 private:
  std::size_t fault_, lo_, hi_;
  double p_;
  Rng rng_;
};

struct ModeTally {
  std::size_t exact = 0;
  std::size_t range_correct = 0;  // Range containing the fault
  std::size_t wrong = 0;          // wrong point or a range missing the fault
  std::size_t aborted = 0;
  std::size_t probes = 0;
  std::size_t steps = 0;
  std::size_t range_width = 0;  // summed over correct ranges

  std::size_t successes() const { return exact + range_correct; }
};

struct SimulationReport {
  SimulationConfig config;
  ModeTally classic;
  ModeTally robust;

  std::string text() const;
};

inline void tally(ModeTally& t, const BisectSession& s, std::size_t fault) {
  t.probes += s.probe_count();
  t.steps += s.steps.size();
  const auto& r = s.result;
  if (r.is_aborted()) ++t.aborted;
  else if (r.is_localized()) (r.hi == fault ? t.exact : t.wrong) += 1;
  else if (r.lo <= fault && fault <= r.hi) {
    ++t.range_correct;
    t.range_width += r.hi - r.lo + 1;
  } else {
    ++t.wrong;
  }
}

/// Runs the same seeded fault positions through both modes. Classic success
/// is an exact answer; robust success is an exact answer or a range that
/// contains the fault.
inline SimulationReport simulate(const SimulationConfig& c) {
  c.validate();
  SimulationReport rep{c, {}, {}};
  const auto seq = CommitSequence::synthetic(c.interior + 2);
  Rng master(c.seed);
  for (std::size_t i = 0; i < c.sessions; ++i) {
    const std::size_t fault = static_cast<std::size_t>(master.between(1, c.interior));
    const std::size_t half = c.region_width / 2;
    const std::size_t lo = fault > half ? std::max<std::size_t>(1, fault - half) : 1;
    const std::size_t hi = std::min(c.interior, lo + (c.region_width ? c.region_width - 1 : 0));
    const std::uint64_t s1 = master.next(), s2 = master.next();
    NoisyOracle classic_oracle(fault, lo, c.region_width ? hi : 0, c.flip_probability, s1);
    NoisyOracle robust_oracle(fault, lo, c.region_width ? hi : 0, c.flip_probability, s2);
    tally(rep.classic, run_classic(seq, classic_oracle, "simulated"), fault);
    tally(rep.robust, run_robust(seq, robust_oracle, "simulated", c.policy), fault);
  }
  return rep;
}

inline std::string SimulationReport::text() const {
  auto pct = [&](std::size_t k) {
    char b[32];
    std::snprintf(b, sizeof b, "%.1f%%", 100.0 * static_cast<double>(k) / static_cast<double>(config.sessions));
    return std::string(b);
  };
  auto mean = [&](std::size_t total) {
    char b[32];
    std::snprintf(b, sizeof b, "%.3f", static_cast<double>(total) / static_cast<double>(config.sessions));
    return std::string(b);
  };
  char head[256];
  std::snprintf(head, sizeof head,
                "simulation seed=%llu sessions=%zu interior=%zu flip_probability=%.4f "
                "region_width=%zu requery_limit=%d\n",
                static_cast<unsigned long long>(config.seed), config.sessions, config.interior,
                config.flip_probability, config.region_width, config.policy.requery_limit);
  std::string t = head;
  auto line = [&](const char* name, const ModeTally& m) {
    t += std::string(name) + ": success=" + std::to_string(m.successes()) + " (" +
         pct(m.successes()) + ") exact=" + std::to_string(m.exact) +
         " range=" + std::to_string(m.range_correct) + " wrong=" + std::to_string(m.wrong) +
         " aborted=" + std::to_string(m.aborted) + " mean_probes=" + mean(m.probes) +
         " mean_steps=" + mean(m.steps);
    if (m.range_correct) {
      char b[32];
      std::snprintf(b, sizeof b, "%.2f",
                    static_cast<double>(m.range_width) / static_cast<double>(m.range_correct));
      t += std::string(" mean_range_width=") + b;
    }
    t += "\n";
  };
  line("classic", classic);
  line("robust", robust);
  return t;
}

}  // namespace llm_bisect
