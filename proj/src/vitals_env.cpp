#include "rbrl/vitals_env.hpp"

#include "rbrl/text.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rbrl {

void VitalsConfig::validate() const {
  if (num_devices < 1) throw ConfigError("vitals: num_devices must be >= 1");
  if (residency < 1) throw ConfigError("vitals: residency must be >= 1");
  if (max_episode_steps < 1) throw ConfigError("vitals: max_episode_steps must be >= 1");
  for (const auto& r : normal_range) {
    if (!(r.lo < r.hi)) throw ConfigError("vitals: normal range must satisfy lo < hi");
  }
  for (double s : cost_scale) {
    if (s <= 0.0) throw ConfigError("vitals: cost scales must be positive");
  }
  if (cost_exponent_cap <= 0.0) throw ConfigError("vitals: cost_exponent_cap must be positive");
  for (double a : ar_coef) {
    if (a < 0.0 || a > 1.0) throw ConfigError("vitals: ar coefficients must lie in [0, 1]");
  }
  for (double s : init_std) {
    if (s < 0.0) throw ConfigError("vitals: init std must be non-negative");
  }
  if (intervention_success < 0.0 || intervention_success > 1.0)
    throw ConfigError("vitals: intervention_success must lie in [0, 1]");
  if (inward_offset_frac < 0.0 || inward_offset_frac > 1.0)
    throw ConfigError("vitals: inward_offset_frac must lie in [0, 1]");
  Eigen::Matrix3d cov;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) cov(r, c) = noise_cov[r * 3 + c];
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw ConfigError("vitals: noise covariance must be symmetric");
  if (Eigen::LLT<Eigen::Matrix3d>(cov).info() != Eigen::Success)
    throw ConfigError("vitals: noise covariance must be positive definite");
}

Eigen::Vector3d Patient::running_std() const {
  if (obs_count <= 0) return Eigen::Vector3d::Zero();
  return (m2 / static_cast<double>(obs_count)).cwiseSqrt();
}

void Patient::observe(const Eigen::Vector3d& x) {
  ++obs_count;
  Eigen::Vector3d delta = x - mean;
  mean += delta / static_cast<double>(obs_count);
  m2 += delta.cwiseProduct(x - mean);
  last = x;
}

VitalsEnv::VitalsEnv(const VitalsConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Eigen::Matrix3d cov;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) cov(r, c) = cfg_.noise_cov[r * 3 + c];
  noise_chol_ = Eigen::LLT<Eigen::Matrix3d>(cov).matrixL();

  spec_.id = "vitals";
  spec_.state_dim = cfg_.num_devices * 10 + cfg_.num_devices;
  spec_.num_actions = cfg_.num_devices;
  spec_.max_episode_steps = cfg_.max_episode_steps;
  spec_.discount = cfg_.discount;
  spec_.validate();

  slots_.assign(cfg_.num_devices, std::nullopt);
  cur_ = encode();
}

Patient VitalsEnv::sample_arrival(Rng& rng, long long id) const {
  Patient p;
  p.id = id;
  Eigen::Vector3d x;
  for (int v = 0; v < 3; ++v) x(v) = rng.normal(cfg_.init_mean[v], cfg_.init_std[v]);
  p.observe(x);
  return p;
}

void VitalsEnv::passive_transition(Patient& p, Rng& rng) const {
  Eigen::Vector3d z;
  for (int v = 0; v < 3; ++v) z(v) = rng.normal();
  Eigen::Vector3d next;
  for (int v = 0; v < 3; ++v)
    next(v) = cfg_.ar_coef[v] * p.last(v) + (1.0 - cfg_.ar_coef[v]) * cfg_.long_run_mean[v];
  next += noise_chol_ * z;
  p.observe(next);
}

void VitalsEnv::active_transition(Patient& p, Rng& rng) const {
  bool abnormal = false;
  for (int v = 0; v < 3; ++v) {
    if (p.last(v) < cfg_.normal_range[v].lo || p.last(v) > cfg_.normal_range[v].hi) {
      abnormal = true;
      break;
    }
  }
  if (abnormal && rng.uniform() < cfg_.intervention_success) {
    // Clinician corrects each violated vital to just inside the nearer bound.
    for (int v = 0; v < 3; ++v) {
      const auto& r = cfg_.normal_range[v];
      double width = r.hi - r.lo;
      if (p.last(v) < r.lo) {
        p.last(v) = r.lo + rng.uniform(0.0, cfg_.inward_offset_frac * width);
      } else if (p.last(v) > r.hi) {
        p.last(v) = r.hi - rng.uniform(0.0, cfg_.inward_offset_frac * width);
      }
    }
  }
  passive_transition(p, rng);
}

double VitalsEnv::deviation_cost(const Patient& p) const {
  double cost = 0.0;
  for (int v = 0; v < 3; ++v) {
    const auto& r = cfg_.normal_range[v];
    double d = 0.0;
    if (p.last(v) < r.lo) d = r.lo - p.last(v);
    else if (p.last(v) > r.hi) d = p.last(v) - r.hi;
    cost += std::exp(std::min(d / cfg_.cost_scale[v], cfg_.cost_exponent_cap)) - 1.0;
  }
  return cost;
}

double VitalsEnv::removal_future_cost(Patient p, Rng& rng) const {
  double cost = 0.0;
  double disc = 1.0;
  const int remaining = cfg_.residency - p.time_worn;
  for (int j = 0; j < remaining; ++j) {
    passive_transition(p, rng);
    cost += disc * deviation_cost(p);
    disc *= cfg_.discount;
  }
  return cost;
}

NumericState VitalsEnv::reset(uint64_t seed) {
  rng_.seed(derive_seed(seed, 0x71'7a));
  slots_.assign(cfg_.num_devices, std::nullopt);
  warm_up_done_ = cfg_.num_devices == 1;
  next_patient_id_ = 0;
  slots_[0] = sample_arrival(rng_, next_patient_id_++);
  cur_ = encode();
  cur_.step_index = 0;
  return cur_;
}

int VitalsEnv::lowest_free() const {
  for (int i = 0; i < cfg_.num_devices; ++i) {
    if (!slots_[i]) return i;
  }
  return -1;
}

StepOutcome VitalsEnv::step(int action) {
  if (action < 0 || action >= cfg_.num_devices)
    throw std::out_of_range("vitals: device " + std::to_string(action) + " outside [0, " +
                            std::to_string(cfg_.num_devices) + ")");
  StepOutcome out;
  std::ostringstream note;
  double reward = 0.0;
  const int next_step = cur_.step_index + 1;

  // 1. Patients at the end of their stay leave and release their devices.
  for (int i = 0; i < cfg_.num_devices; ++i) {
    if (slots_[i] && slots_[i]->time_worn >= cfg_.residency) {
      note << "patient " << slots_[i]->id << " completed her stay; device " << i << " freed. ";
      slots_[i] = std::nullopt;
    }
  }

  // 2. One new patient arrives and the chosen device decides her placement.
  int target = action;
  if (!warm_up_done_) {
    // Until every device has been claimed once, arrivals always take a free
    // device and no removal can happen.
    if (slots_[target]) {
      target = lowest_free();
      if (target < 0) throw std::logic_error("vitals: warm-up invariant violated");
      note << "warm-up: device " << action << " is occupied, arrival placed on free device "
           << target << ". ";
    }
  } else if (slots_[target]) {
    const bool free_existed = lowest_free() >= 0;
    Patient removed = *slots_[target];
    double future = removal_future_cost(removed, rng_);
    reward -= future;
    note << "patient " << removed.id << " removed from device " << target
         << " after wearing it " << removed.time_worn
         << " step(s); her remaining stay costs " << format_fixed(future, 4) << ". ";
    if (free_existed) {
      reward += cfg_.removal_penalty;
      note << "a free device was available, penalty applied. ";
    }
    slots_[target] = std::nullopt;
  }
  Patient arrival = sample_arrival(rng_, next_patient_id_++);
  slots_[target] = arrival;
  if (lowest_free() < 0) warm_up_done_ = true;

  // 3. Monitored patients other than the fresh arrival evolve one step under
  //    active dynamics (interventions may correct abnormal vitals).
  for (int i = 0; i < cfg_.num_devices; ++i) {
    if (!slots_[i] || slots_[i]->id == arrival.id) continue;
    active_transition(*slots_[i], rng_);
    slots_[i]->time_worn += 1;
  }

  // 4. Reward: negative deviation cost of everyone currently monitored.
  for (int i = 0; i < cfg_.num_devices; ++i) {
    if (slots_[i]) reward -= deviation_cost(*slots_[i]);
  }

  cur_ = encode();
  cur_.step_index = next_step;
  out.reward = reward;
  out.note = trim(note.str());
  out.truncated = next_step >= cfg_.max_episode_steps;
  out.next_state = cur_;
  return out;
}

NumericState VitalsEnv::encode() const {
  NumericState s;
  s.values = Vec::Zero(spec_.state_dim);
  for (int i = 0; i < cfg_.num_devices; ++i) {
    const int base = i * 10;
    if (slots_[i]) {
      const Patient& p = *slots_[i];
      Eigen::Vector3d sd = p.running_std();
      for (int v = 0; v < 3; ++v) {
        s.values(base + v * 3 + 0) = p.last(v);
        s.values(base + v * 3 + 1) = p.mean(v);
        s.values(base + v * 3 + 2) = sd(v);
      }
      s.values(base + 9) = static_cast<double>(p.time_worn);
    } else {
      s.values(cfg_.num_devices * 10 + i) = 1.0;
    }
  }
  return s;
}

BudgetStatus VitalsEnv::budget() const {
  BudgetStatus b;
  int used = 0;
  std::vector<int> free_ids;
  for (int i = 0; i < cfg_.num_devices; ++i) {
    if (slots_[i]) ++used;
    else free_ids.push_back(i);
  }
  b.spent = used;
  b.limit = cfg_.num_devices;
  std::ostringstream os;
  os << cfg_.num_devices << " monitoring device(s) total; " << used << " in use, "
     << free_ids.size() << " free";
  if (!free_ids.empty()) {
    os << " (device";
    for (size_t k = 0; k < free_ids.size(); ++k) os << (k ? "," : "") << ' ' << free_ids[k];
    os << ")";
  }
  os << ".";
  b.text = os.str();
  return b;
}

std::string VitalsEnv::task_text() const {
  std::ostringstream os;
  os << "You manage " << cfg_.num_devices
     << " wearable vital-sign monitors on a postpartum ward. One new mother is admitted every "
        "step and stays for "
     << cfg_.residency
     << " steps. Each step, choose the device for the incoming mother: a free device if one is "
        "available, otherwise the device to take from its current wearer. A monitored mother "
        "with abnormal vitals may be stabilized by clinicians; an unmonitored mother receives "
        "no intervention and her remaining stay is charged immediately when the device is "
        "taken. Normal ranges: pulse rate "
     << format_fixed(cfg_.normal_range[0].lo, 0) << "-" << format_fixed(cfg_.normal_range[0].hi, 0)
     << ", respiratory rate " << format_fixed(cfg_.normal_range[1].lo, 0) << "-"
     << format_fixed(cfg_.normal_range[1].hi, 0) << ", SPO2 "
     << format_fixed(cfg_.normal_range[2].lo, 0) << "-" << format_fixed(cfg_.normal_range[2].hi, 0)
     << ". The goal is to keep cumulative deviation from these ranges as small as possible.";
  return os.str();
}

std::string VitalsEnv::action_space_text() const {
  return "Device ids 0 through " + std::to_string(cfg_.num_devices - 1) +
         ". Choosing a free device assigns it to the incoming mother; choosing an occupied "
         "device removes it from its current wearer and reassigns it.";
}

std::string VitalsEnv::action_text(int action) const {
  return "{\"device\": " + std::to_string(action) + "}";
}

std::string VitalsEnv::describe_state(const NumericState& s) const {
  static const char* kVitalNames[3] = {"Pulse rate", "Respiratory rate", "SPO2"};
  std::ostringstream os;
  for (int i = 0; i < cfg_.num_devices; ++i) {
    const int base = i * 10;
    const bool is_free = s.values(cfg_.num_devices * 10 + i) > 0.5;
    if (is_free) {
      os << "Device " << i << ": Device is currently free.\n";
      continue;
    }
    os << "Device " << i
       << ": Device is currently assigned to a patient with the following description:\n";
    for (int v = 0; v < 3; ++v) {
      os << " *" << kVitalNames[v] << "* - Last value: " << format_fixed(s.values(base + v * 3), 2)
         << " - Mean: " << format_fixed(s.values(base + v * 3 + 1), 2)
         << " - Standard deviation/volatility: " << format_fixed(s.values(base + v * 3 + 2), 2)
         << "\n";
    }
    os << " *Timesteps wearing the device*: " << static_cast<long long>(s.values(base + 9))
       << "\n";
  }
  std::string text = os.str();
  if (!text.empty() && text.back() == '\n') text.pop_back();
  return text;
}

std::vector<RuleText> VitalsEnv::example_rules() const {
  std::vector<RuleText> out;
  out.push_back({"Free capacity should never be wasted while mothers wait unmonitored.",
                 "Prioritize assigning a free device when one is available.",
                 "Applies whenever at least one device is free."});
  out.push_back({"Patients whose vitals have stayed within normal ranges tolerate unmonitored "
                 "recovery best.",
                 "Choose to remove the device from the most stable patient when no device is "
                 "free.",
                 "Applies when every device is occupied."});
  return out;
}

}  // namespace rbrl
