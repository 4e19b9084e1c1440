#include "rbrl/scripted_backend.hpp"

#include "rbrl/text.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rbrl {

using nlohmann::json;

void ScriptedOptions::validate() const {
  if (toy_rules != "distinct" && toy_rules != "paired")
    throw ConfigError("scripted: toy_rules must be 'distinct' or 'paired'");
  if (toy_offset_hint < 0) throw ConfigError("scripted: toy_offset_hint must be >= 0");
  if (thought_accuracy < 0.0 || thought_accuracy > 1.0)
    throw ConfigError("scripted: thought_accuracy must lie in [0, 1]");
}

namespace {

// ---------------------------------------------------------------------------
// Prompt dissection. Templates label their blocks with all-caps headers on
// their own line; a block ends at the next blank line or the next header.

const char* const kHeaders[] = {
    "TASK:",          "CURRENT STATE:", "STATE:",           "ALLOWED ACTIONS:",
    "CONSTRAINTS:",   "ANALYSIS:",      "SELECTED RULE:",   "RULE:",
    "RULE UNDER EVALUATION:",           "ACTION TAKEN:",    "CANDIDATE RULES:",
    "EXPLANATION A:", "EXPLANATION B:",
};

struct Prompt {
  std::string full;
  std::map<std::string, std::string> sections;

  std::string section(const std::string& name) const {
    auto it = sections.find(name);
    return it == sections.end() ? std::string() : it->second;
  }
  bool has(const std::string& sentinel) const { return full.find(sentinel) != std::string::npos; }
};

Prompt dissect(const std::string& text) {
  Prompt p;
  p.full = text;
  std::string current;
  for (const std::string& raw : split_lines(text)) {
    const std::string line = trim(raw);
    bool is_header = false;
    for (const char* h : kHeaders) {
      if (line == h) {
        current = h;
        p.sections[current];  // ensure the key exists even for empty blocks
        is_header = true;
        break;
      }
    }
    if (is_header) continue;
    if (current.empty()) continue;
    if (line.empty()) {
      current.clear();
      continue;
    }
    std::string& s = p.sections[current];
    if (!s.empty()) s += '\n';
    s += raw;
  }
  return p;
}

// The state block appears under "CURRENT STATE:" in most templates and under
// "STATE:" in the comparison template.
std::string state_of(const Prompt& p) {
  std::string s = p.section("CURRENT STATE:");
  return s.empty() ? p.section("STATE:") : s;
}

std::string rule_section(const Prompt& p) {
  for (const char* name : {"SELECTED RULE:", "RULE UNDER EVALUATION:", "RULE:"}) {
    std::string s = p.section(name);
    if (!s.empty()) return s;
  }
  return {};
}

// Pulls the "Rule:" / "Relevance:" lines back out of a displayed rule block.
std::string rule_line(const std::string& block, const std::string& label) {
  for (const std::string& line : split_lines(block)) {
    const std::string t = trim(line);
    if (t.rfind(label, 0) == 0) return trim(t.substr(label.size()));
  }
  return {};
}

enum class Domain { kToy, kVitals, kHeat, kGeneric };

Domain detect_domain(const Prompt& p) {
  const std::string task = p.section("TASK:").empty() ? p.full : p.section("TASK:");
  if (task.find("wearable vital-sign monitors") != std::string::npos) return Domain::kVitals;
  if (task.find("public heat alerts") != std::string::npos) return Domain::kHeat;
  if (task.find("token moving around a ring") != std::string::npos) return Domain::kToy;
  return Domain::kGeneric;
}

// ---------------------------------------------------------------------------
// Parsing the rendered state descriptions back into numbers.

struct ToyView {
  int position = 0;
  int num_positions = 0;
  int num_actions = 0;
  bool ok = false;
};

ToyView parse_toy(const Prompt& p) {
  ToyView v;
  const auto ints = extract_integers(state_of(p));
  if (ints.size() >= 2) {
    v.position = static_cast<int>(ints[0]);
    v.num_positions = static_cast<int>(ints[1]);
  }
  if (auto m = integer_after(p.section("TASK:"), "one of")) v.num_actions = static_cast<int>(*m);
  if (v.num_actions <= 0) v.num_actions = std::max(1, v.num_positions);
  v.ok = v.num_positions > 0;
  return v;
}

struct HeatView {
  double heat = 0.0;
  int remaining = 0, budget = 0, day = 0, season = 0, streak = 0;
  bool ok = false;
};

HeatView parse_heat(const Prompt& p) {
  HeatView v;
  const std::string s = state_of(p);
  if (auto h = number_after(s, "heat index:")) {
    v.heat = *h;
    v.ok = true;
  }
  if (auto d = integer_after(s, "Day")) v.day = static_cast<int>(*d);
  if (auto n = integer_after(s, "Day " + std::to_string(v.day) + " of"))
    v.season = static_cast<int>(*n);
  if (auto r = integer_after(s, "Remaining alert budget:")) v.remaining = static_cast<int>(*r);
  if (auto b = integer_after(s, "Remaining alert budget: " + std::to_string(v.remaining) + " of"))
    v.budget = static_cast<int>(*b);
  if (auto k = integer_after(s, "streak:")) v.streak = static_cast<int>(*k);
  return v;
}

struct VitalsDevice {
  int id = -1;
  bool free = false;
  double last[3] = {0, 0, 0};
  double mean[3] = {0, 0, 0};
  double sd[3] = {0, 0, 0};
  long long worn = 0;
};

struct VitalsView {
  std::vector<VitalsDevice> devices;
  double lo[3] = {60, 12, 94};
  double hi[3] = {100, 20, 100};
  bool ok = false;

  bool any_free() const {
    for (const auto& d : devices)
      if (d.free) return true;
    return false;
  }
  int lowest_free() const {
    for (const auto& d : devices)
      if (d.free) return d.id;
    return -1;
  }
  double dist(double x, int vital) const {
    return std::max(0.0, std::max(lo[vital] - x, x - hi[vital]));
  }
  // Instability of a wearer: distance of the latest readings outside the
  // normal ranges, plus half-weighted distance of the running means.
  double dev_score(const VitalsDevice& d) const {
    double s = 0.0;
    for (int v = 0; v < 3; ++v) s += dist(d.last[v], v) + 0.5 * dist(d.mean[v], v);
    return s;
  }
  bool all_normal(const VitalsDevice& d) const {
    for (int v = 0; v < 3; ++v)
      if (dist(d.last[v], v) > 0.0) return false;
    return true;
  }
  int most_stable() const {
    int best = -1;
    double best_score = 0.0;
    for (const auto& d : devices) {
      if (d.free) continue;
      const double s = dev_score(d);
      if (best < 0 || s < best_score) {
        best = d.id;
        best_score = s;
      }
    }
    return best;
  }
  int longest_worn() const {
    int best = -1;
    long long best_worn = -1;
    for (const auto& d : devices) {
      if (d.free) continue;
      if (d.worn > best_worn) {
        best = d.id;
        best_worn = d.worn;
      }
    }
    return best;
  }
  const VitalsDevice* device(int id) const {
    for (const auto& d : devices)
      if (d.id == id) return &d;
    return nullptr;
  }
};

VitalsView parse_vitals(const Prompt& p) {
  VitalsView v;
  const std::string task = p.section("TASK:");
  auto range_after = [&](const std::string& marker, double* lo, double* hi) {
    const std::string lt = to_lower(task);
    size_t pos = lt.find(marker);
    if (pos == std::string::npos) return;
    auto nums = extract_numbers(task.substr(pos + marker.size()));
    if (nums.size() >= 2) {
      *lo = std::fabs(nums[0]);
      *hi = std::fabs(nums[1]);  // "60-100" parses as {60, -100}
    }
  };
  range_after("pulse rate", &v.lo[0], &v.hi[0]);
  range_after("respiratory rate", &v.lo[1], &v.hi[1]);
  range_after("spo2", &v.lo[2], &v.hi[2]);

  VitalsDevice* cur = nullptr;
  for (const std::string& raw : split_lines(state_of(p))) {
    const std::string line = trim(raw);
    if (line.rfind("Device ", 0) == 0) {
      VitalsDevice d;
      if (auto id = integer_after(line, "Device")) d.id = static_cast<int>(*id);
      d.free = line.find("currently free") != std::string::npos;
      v.devices.push_back(d);
      cur = &v.devices.back();
      continue;
    }
    if (!cur) continue;
    int vital = -1;
    if (contains_ci(line, "*Pulse rate*")) vital = 0;
    if (contains_ci(line, "*Respiratory rate*")) vital = 1;
    if (contains_ci(line, "*SPO2*")) vital = 2;
    if (vital >= 0) {
      if (auto x = number_after(line, "Last value:")) cur->last[vital] = *x;
      if (auto x = number_after(line, "Mean:")) cur->mean[vital] = *x;
      if (auto x = number_after(line, "volatility:")) cur->sd[vital] = *x;
    } else if (contains_ci(line, "Timesteps wearing")) {
      if (auto w = integer_after(line, "*:")) cur->worn = *w;
    }
  }
  v.ok = !v.devices.empty();
  return v;
}

// ---------------------------------------------------------------------------
// Default (rule-free) policies per domain.

int mod_positive(int a, int m) { return ((a % m) + m) % m; }

int toy_heuristic(const ToyView& v, int offset_hint) {
  if (v.num_actions <= 0) return 0;
  return mod_positive(v.position + offset_hint, v.num_actions);
}

int heat_heuristic(const HeatView& v) {
  return (v.heat >= 0.70 && v.remaining > 0 && v.streak < 3) ? 1 : 0;
}

int vitals_heuristic(const VitalsView& v) {
  if (v.any_free()) return std::max(0, v.lowest_free());
  return std::max(0, v.most_stable());
}

// ---------------------------------------------------------------------------
// Rule libraries. Each entry instantiates its statement and relevance from
// the parsed state, so the relevance cites checkable facts.

std::vector<RuleText> toy_library(const ToyView& v, const ScriptedOptions& opts) {
  std::vector<RuleText> lib;
  const int m = std::max(1, v.num_actions);
  auto crisp = [&](int offset, int flavor) {
    static const char* kStatements[] = {
        "Choose the action numbered (position + %d) mod %d.",
        "Pick the move numbered (position + %d) mod %d each round.",
        "Select action (position + %d) mod %d whenever you are unsure.",
    };
    char stmt[160];
    std::snprintf(stmt, sizeof(stmt), kStatements[flavor % 3], offset, m);
    RuleText r;
    r.background = "Experienced players find the paying move leads the position by " +
                   std::to_string(offset) + ".";
    r.rule_statement = stmt;
    r.state_relevance = "The position is " + std::to_string(v.position) +
                        ", so this rule selects action " +
                        std::to_string(mod_positive(v.position + offset, m)) + ".";
    return r;
  };
  if (opts.toy_rules == "paired") {
    static const char* kVagueStatements[] = {
        "Trust the sort of move that has been working and stay with it.",
        "Lean on momentum rather than overthinking the move.",
        "Play whatever feels natural for the ring right now.",
    };
    static const char* kVagueRelevance[] = {
        "It has felt right in recent rounds.",
        "Momentum is on your side.",
        "The ring rewards instinct.",
    };
    for (int i = 0; i < 6; ++i) {
      if (i % 2 == 0) {
        lib.push_back(crisp(opts.toy_offset_hint, i / 2));
      } else {
        RuleText r;
        r.background = "Intuition accumulated over many rounds.";
        r.rule_statement = kVagueStatements[(i / 2) % 3];
        r.state_relevance = kVagueRelevance[(i / 2) % 3];
        lib.push_back(r);
      }
    }
  } else {
    for (int k = 0; k < m; ++k) lib.push_back(crisp(k, k));
  }
  return lib;
}

std::vector<RuleText> heat_library(const HeatView& v) {
  std::vector<RuleText> lib;
  const std::string cite = "The current heat index is " + format_fixed(v.heat, 2) + " with " +
                           std::to_string(v.remaining) + " alert(s) remaining.";
  for (double cutoff : {0.85, 0.75, 0.65, 0.55, 0.45}) {
    RuleText r;
    r.background =
        "Harm scales with the square of the heat index, so the hottest days dominate the season.";
    r.rule_statement = "Issue an alert when the heat index exceeds " + format_fixed(cutoff, 2) +
                       " and budget remains; otherwise hold.";
    r.state_relevance = cite;
    lib.push_back(r);
  }
  {
    RuleText r;
    r.background = "Back-to-back alerts lose force as residents tune them out.";
    r.rule_statement =
        "Choose no alert when the current consecutive-alert streak is 2 or more days.";
    r.state_relevance =
        "The current consecutive-alert streak is " + std::to_string(v.streak) + " day(s).";
    lib.push_back(r);
  }
  {
    RuleText r;
    r.background = "Budget spent early cannot cover late-season heat waves.";
    r.rule_statement =
        "Choose no alert when fewer than 3 alerts remain and the heat index is below 0.80.";
    r.state_relevance = cite;
    lib.push_back(r);
  }
  {
    RuleText r;
    r.background = "Public-health intuition built up over many seasons.";
    r.rule_statement = "Generally protect the public on days that feel dangerous.";
    r.state_relevance = "Dangerous days call for caution.";
    lib.push_back(r);
  }
  return lib;
}

std::vector<RuleText> vitals_library(const VitalsView& v) {
  std::vector<RuleText> lib;
  const int free_id = v.lowest_free();
  if (free_id >= 0) {
    RuleText r;
    r.background = "Idle capacity is wasted while an incoming mother goes unmonitored.";
    r.rule_statement = "Prioritize assigning free device " + std::to_string(free_id) +
                       " to the incoming mother when any device is free.";
    r.state_relevance = "Device " + std::to_string(free_id) + " is currently free.";
    lib.push_back(r);

    RuleText r2;
    r2.background = "Low device numbers are restocked first at the nursing station.";
    r2.rule_statement =
        "Choose the lowest-numbered free device, device " + std::to_string(free_id) + ".";
    r2.state_relevance = "Device " + std::to_string(free_id) + " is currently free.";
    lib.push_back(r2);
  } else {
    const int stable = v.most_stable();
    if (stable >= 0) {
      RuleText r;
      r.background = "Mothers with steady vitals tolerate unmonitored recovery best.";
      r.rule_statement = "Choose device " + std::to_string(stable) +
                         " for the incoming mother, taking it from the most stable wearer, "
                         "when no device is free.";
      r.state_relevance = "No device is free, and device " + std::to_string(stable) +
                          "'s wearer has the smallest total deviation from normal ranges.";
      lib.push_back(r);
    }
    const int longest = v.longest_worn();
    if (longest >= 0) {
      const VitalsDevice* d = v.device(longest);
      RuleText r;
      r.background = "Long-monitored mothers have already had the most observation time.";
      r.rule_statement = "Choose device " + std::to_string(longest) +
                         ", which has been worn longest, when no device is free.";
      r.state_relevance = "No device is free, and device " + std::to_string(longest) +
                          " has been worn longest, for " + std::to_string(d ? d->worn : 0) +
                          " steps.";
      lib.push_back(r);
    }
    int normal_id = -1;
    long long normal_worn = -1;
    for (const auto& d : v.devices) {
      if (!d.free && v.all_normal(d) && d.worn > normal_worn) {
        normal_id = d.id;
        normal_worn = d.worn;
      }
    }
    if (normal_id >= 0) {
      RuleText r;
      r.background = "Devices do the most good on wearers whose vitals are drifting.";
      r.rule_statement = "Prioritize taking device " + std::to_string(normal_id) +
                         " from a wearer whose vitals are all within normal ranges when no "
                         "device is free.";
      r.state_relevance = "No device is free, and device " + std::to_string(normal_id) +
                          "'s wearer has all vitals within normal ranges.";
      lib.push_back(r);
    }
  }
  {
    RuleText r;
    r.background = "Fair rotation fosters trust on the ward.";
    r.rule_statement = "Try to be fair about how long each mother keeps a monitor.";
    r.state_relevance = "Fairness always applies.";
    lib.push_back(r);
  }
  {
    RuleText r;
    r.background = "Care routines suffer when equipment moves too often.";
    r.rule_statement = "Keep overall disruption on the ward low.";
    r.state_relevance = "The ward is busy.";
    lib.push_back(r);
  }
  return lib;
}

std::vector<RuleText> generic_library() {
  std::vector<RuleText> lib;
  lib.push_back({"Conserving resources keeps options open.",
                 "Choose action 0 when the state gives no reason to act.",
                 "The state gives no specific signal."});
  lib.push_back({"Acting early can preempt losses.", "Err on the side of acting soon.",
                 "Timing pressure is unclear."});
  return lib;
}

// ---------------------------------------------------------------------------
// Applying a rule statement to the current state. Returns the prescribed
// action, or nullopt when the statement does not pin one down here.

std::optional<int> toy_prescription(const std::string& stmt, const ToyView& v) {
  const std::string ls = to_lower(stmt);
  size_t pos = ls.find("position +");
  if (pos == std::string::npos) pos = ls.find("position+");
  if (pos == std::string::npos) return std::nullopt;
  auto ints = extract_integers(stmt.substr(pos));
  if (ints.empty() || v.num_actions <= 0) return std::nullopt;
  return mod_positive(v.position + static_cast<int>(ints[0]), v.num_actions);
}

std::optional<int> heat_prescription(const std::string& stmt, const HeatView& v) {
  const std::string ls = to_lower(stmt);
  if (ls.find("exceeds") != std::string::npos) {
    if (auto cutoff = number_after(stmt, "exceeds"))
      return (v.heat > *cutoff && v.remaining > 0) ? 1 : 0;
  }
  if (ls.find("no alert when") != std::string::npos &&
      ls.find("streak") != std::string::npos) {
    if (auto k = integer_after(stmt, "streak is")) {
      if (v.streak >= *k) return 0;
      return std::nullopt;  // the rule's condition does not hold here
    }
  }
  if (ls.find("fewer than") != std::string::npos) {
    auto n = integer_after(stmt, "fewer than");
    auto cutoff = number_after(stmt, "below");
    if (n && cutoff) {
      if (v.remaining < *n && v.heat < *cutoff) return 0;
      return std::nullopt;
    }
  }
  return std::nullopt;
}

std::optional<int> vitals_prescription(const std::string& stmt, const VitalsView& v) {
  if (auto id = integer_after(stmt, "device")) {
    if (*id >= 0 && *id < static_cast<long long>(v.devices.size())) return static_cast<int>(*id);
  }
  return std::nullopt;
}

std::optional<int> prescription(Domain domain, const std::string& stmt, const Prompt& p) {
  switch (domain) {
    case Domain::kToy:
      return toy_prescription(stmt, parse_toy(p));
    case Domain::kHeat:
      return heat_prescription(stmt, parse_heat(p));
    case Domain::kVitals:
      return vitals_prescription(stmt, parse_vitals(p));
    case Domain::kGeneric: {
      if (auto a = integer_after(stmt, "action")) {
        if (*a >= 0) return static_cast<int>(*a);
      }
      return std::nullopt;
    }
  }
  return std::nullopt;
}

int default_action(Domain domain, const Prompt& p, const ScriptedOptions& opts) {
  switch (domain) {
    case Domain::kToy:
      return toy_heuristic(parse_toy(p), opts.toy_offset_hint);
    case Domain::kHeat:
      return heat_heuristic(parse_heat(p));
    case Domain::kVitals:
      return vitals_heuristic(parse_vitals(p));
    case Domain::kGeneric:
      return 0;
  }
  return 0;
}

int num_actions_of(Domain domain, const Prompt& p) {
  switch (domain) {
    case Domain::kToy:
      return std::max(1, parse_toy(p).num_actions);
    case Domain::kHeat:
      return 2;
    case Domain::kVitals:
      return std::max<int>(1, static_cast<int>(parse_vitals(p).devices.size()));
    case Domain::kGeneric:
      return 1;
  }
  return 1;
}

// Canonical action rendering; the structured key is inferred from the
// requested format shown in the prompt.
std::string action_reply(const Prompt& p, int action) {
  std::string key = "action";
  if (p.has("\"device\"")) key = "device";
  if (p.has("\"alert\"")) key = "alert";
  return "{\"" + key + "\": " + std::to_string(action) + "}";
}

// ---------------------------------------------------------------------------
// Judging criteria. ER1: the statement names a directive and at least one
// concrete quantity. ER2: the relevance cites at least one checkable fact
// and none of its citations contradict the state. ER3: the taken action
// matches what the rule prescribes here.

bool er1_actionable(const std::string& stmt) {
  const std::string ls = to_lower(stmt);
  static const char* kVerbs[] = {"prioritize", "choose", "issue", "assign", "select",
                                 "pick",       "take",   "hold",  "alert"};
  bool has_verb = false;
  for (const char* verb : kVerbs)
    if (ls.find(verb) != std::string::npos) has_verb = true;
  bool has_digit = false;
  for (char c : stmt)
    if (std::isdigit(static_cast<unsigned char>(c))) has_digit = true;
  return has_verb && has_digit;
}

bool er2_toy(const std::string& relevance, const ToyView& v) {
  auto cited = integer_after(relevance, "position is");
  return cited.has_value() && static_cast<int>(*cited) == v.position;
}

bool er2_heat(const std::string& relevance, const HeatView& v) {
  int checks = 0, fails = 0;
  if (auto h = number_after(relevance, "heat index is")) {
    ++checks;
    if (std::fabs(*h - v.heat) > 0.005) ++fails;
  }
  if (contains_ci(relevance, "remaining")) {
    if (auto r = integer_after(relevance, "with")) {
      ++checks;
      if (static_cast<int>(*r) != v.remaining) ++fails;
    }
  }
  if (auto k = integer_after(relevance, "streak is")) {
    ++checks;
    if (static_cast<int>(*k) != v.streak) ++fails;
  }
  return checks > 0 && fails == 0;
}

bool er2_vitals(const std::string& relevance, const VitalsView& v) {
  const std::string lr = to_lower(relevance);
  int checks = 0, fails = 0;
  if (lr.find("no device is free") != std::string::npos) {
    ++checks;
    if (v.any_free()) ++fails;
  }
  if (lr.find("currently free") != std::string::npos) {
    ++checks;
    auto id = integer_after(relevance, "device");
    const VitalsDevice* d = id ? v.device(static_cast<int>(*id)) : nullptr;
    if (!d || !d->free) ++fails;
  }
  if (lr.find("smallest total deviation") != std::string::npos) {
    ++checks;
    auto id = integer_after(relevance, "device");
    if (!id || static_cast<int>(*id) != v.most_stable()) ++fails;
  }
  if (lr.find("worn longest") != std::string::npos) {
    ++checks;
    auto id = integer_after(relevance, "device");
    if (!id || static_cast<int>(*id) != v.longest_worn()) {
      ++fails;
    } else if (auto w = integer_after(relevance, "for")) {
      const VitalsDevice* d = v.device(static_cast<int>(*id));
      if (!d || d->worn != *w) ++fails;
    }
  }
  if (lr.find("all vitals within normal ranges") != std::string::npos) {
    ++checks;
    auto id = integer_after(relevance, "device");
    const VitalsDevice* d = id ? v.device(static_cast<int>(*id)) : nullptr;
    if (!d || d->free || !v.all_normal(*d)) ++fails;
  }
  return checks > 0 && fails == 0;
}

bool er2_relevant(Domain domain, const std::string& relevance, const Prompt& p) {
  switch (domain) {
    case Domain::kToy:
      return er2_toy(relevance, parse_toy(p));
    case Domain::kHeat:
      return er2_heat(relevance, parse_heat(p));
    case Domain::kVitals:
      return er2_vitals(relevance, parse_vitals(p));
    case Domain::kGeneric:
      return false;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Free-form analyses. The "leaning toward ..." clause is the directive that
// a later action request resolves (imperfectly).

std::string toy_thought(const ToyView& v, int offset_hint) {
  const int lean = toy_heuristic(v, offset_hint);
  std::ostringstream os;
  os << "The token sits at position " << v.position << " of " << v.num_positions
     << "; exactly one move pays here, and a lead of " << offset_hint
     << " has been paying, leaning toward action " << lean << ".";
  return os.str();
}

std::string heat_thought(const HeatView& v) {
  const int lean = heat_heuristic(v);
  std::ostringstream os;
  os << "Day " << v.day << " of " << v.season << " shows heat index " << format_fixed(v.heat, 2)
     << " with " << v.remaining << " of " << v.budget << " alerts left and a streak of "
     << v.streak << " day(s); the squared-heat payoff "
     << (v.heat >= 0.70 ? "looks strong" : "looks weak")
     << ", leaning toward " << (lean == 1 ? "issuing an alert" : "holding") << ".";
  return os.str();
}

std::string vitals_thought(const VitalsView& v) {
  const int lean = vitals_heuristic(v);
  int n_free = 0;
  for (const auto& d : v.devices) n_free += d.free ? 1 : 0;
  std::ostringstream os;
  if (n_free > 0) {
    os << n_free << " of " << v.devices.size()
       << " devices are free, so the incoming mother can be covered without removals";
  } else {
    int worst = -1;
    double worst_score = -1.0;
    for (const auto& d : v.devices) {
      if (d.free) continue;
      const double s = v.dev_score(d);
      if (s > worst_score) {
        worst = d.id;
        worst_score = s;
      }
    }
    os << "No device is free; device " << worst
       << "'s wearer deviates most from normal ranges and should keep monitoring";
  }
  os << ", leaning toward device " << lean << ".";
  return os.str();
}

std::string make_thought(Domain domain, const Prompt& p, const ScriptedOptions& opts) {
  switch (domain) {
    case Domain::kToy:
      return toy_thought(parse_toy(p), opts.toy_offset_hint);
    case Domain::kHeat:
      return heat_thought(parse_heat(p));
    case Domain::kVitals:
      return vitals_thought(parse_vitals(p));
    case Domain::kGeneric:
      return "The state gives little to go on; conserving resources is the default posture.";
  }
  return {};
}

// Directive named after "leaning toward"; nullopt when the analysis hedges
// with no concrete lean.
std::optional<int> lean_of(Domain domain, const std::string& analysis, const Prompt& p) {
  const std::string la = to_lower(analysis);
  size_t pos = la.find("leaning toward");
  if (pos == std::string::npos) return std::nullopt;
  const std::string tail = analysis.substr(pos);
  switch (domain) {
    case Domain::kToy:
      if (auto a = integer_after(tail, "action")) return static_cast<int>(*a);
      return std::nullopt;
    case Domain::kHeat: {
      const std::string lt = to_lower(tail);
      if (lt.find("issu") != std::string::npos) return 1;
      if (lt.find("hold") != std::string::npos || lt.find("no alert") != std::string::npos)
        return 0;
      return std::nullopt;
    }
    case Domain::kVitals:
      if (auto d = integer_after(tail, "device")) return static_cast<int>(*d);
      return std::nullopt;
    case Domain::kGeneric:
      if (auto a = integer_after(tail, "action")) return static_cast<int>(*a);
      return std::nullopt;
  }
  return std::nullopt;
}

std::vector<std::string> make_candidates(Domain domain, const Prompt& p, int q,
                                         const ScriptedOptions& opts, Rng& rng) {
  std::vector<std::string> out;
  if (domain == Domain::kToy) {
    const ToyView v = parse_toy(p);
    const int m = std::max(1, v.num_actions);
    const int start = rng.uniform_int(0, m - 1);
    for (int i = 0; i < q; ++i) {
      const int offset = mod_positive(start + i, m);
      const int lean = mod_positive(v.position + offset, m);
      std::ostringstream os;
      os << "The token is at position " << v.position << "; a lead of " << offset
         << " seems plausible this round, leaning toward action " << lean << ".";
      out.push_back(os.str());
    }
  } else if (domain == Domain::kHeat) {
    const HeatView v = parse_heat(p);
    const int base = heat_heuristic(v);
    for (int i = 0; i < q; ++i) {
      const int lean = (i % 2 == 0) ? base : 1 - base;
      std::ostringstream os;
      os << "Reading " << i + 1 << ": heat index " << format_fixed(v.heat, 2) << " with "
         << v.remaining << " alert(s) left "
         << (lean == 1 ? "justifies spending one today" : "argues for saving the budget")
         << ", leaning toward " << (lean == 1 ? "issuing an alert" : "holding") << ".";
      out.push_back(os.str());
    }
  } else if (domain == Domain::kVitals) {
    const VitalsView v = parse_vitals(p);
    const int n = std::max<int>(1, static_cast<int>(v.devices.size()));
    const int start = rng.uniform_int(0, n - 1);
    for (int i = 0; i < q; ++i) {
      const int lean = mod_positive(start + i, n);
      const VitalsDevice* d = v.device(lean);
      std::ostringstream os;
      os << "Device " << lean << " "
         << (d && d->free ? "is free and costs nothing to use"
                          : "could be reassigned to the incoming mother")
         << ", leaning toward device " << lean << ".";
      out.push_back(os.str());
    }
  } else {
    for (int i = 0; i < q; ++i)
      out.push_back("Little signal either way; leaning toward action 0.");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Explanations and comparisons.

std::string make_explanation(Domain domain, const Prompt& p, const std::string& stmt,
                             int action) {
  std::ostringstream os;
  switch (domain) {
    case Domain::kToy: {
      const ToyView v = parse_toy(p);
      os << "The token sits at position " << v.position << " of " << v.num_positions
         << ". The selected rule says: \"" << stmt << "\" Following it here gives action "
         << action << ".";
      break;
    }
    case Domain::kHeat: {
      const HeatView v = parse_heat(p);
      os << "Day " << v.day << " of " << v.season << " has heat index " << format_fixed(v.heat, 2)
         << ", with " << v.remaining << " of " << v.budget
         << " alerts remaining and a consecutive-alert streak of " << v.streak
         << " day(s). The selected rule says: \"" << stmt << "\" Following it, the choice is to "
         << (action == 1 ? "issue an alert today" : "hold with no alert") << ".";
      break;
    }
    case Domain::kVitals: {
      const VitalsView v = parse_vitals(p);
      const VitalsDevice* d = v.device(action);
      int n_free = 0;
      for (const auto& dev : v.devices) n_free += dev.free ? 1 : 0;
      os << n_free << " of " << v.devices.size() << " devices are free. ";
      if (d && d->free) {
        os << "Device " << action << " is free and goes to the incoming mother. ";
      } else if (d) {
        os << "Device " << action << " is taken from its wearer (pulse " << format_fixed(d->last[0], 2)
           << ", respiratory " << format_fixed(d->last[1], 2) << ", SPO2 "
           << format_fixed(d->last[2], 2) << " after " << d->worn << " steps) and reassigned. ";
      }
      os << "The selected rule says: \"" << stmt << "\"";
      break;
    }
    case Domain::kGeneric:
      os << "Action " << action << " follows the selected rule: \"" << stmt << "\"";
      break;
  }
  return os.str();
}

// The decision the explanation itself reports having made.
std::optional<int> stated_action(Domain domain, const std::string& expl) {
  switch (domain) {
    case Domain::kToy:
      return integer_after(expl, "gives action");
    case Domain::kHeat:
      if (contains_ci(expl, "issue an alert today")) return 1;
      if (contains_ci(expl, "hold with no alert")) return 0;
      return std::nullopt;
    case Domain::kVitals:
      return integer_after(expl, "device");
    default:
      return integer_after(expl, "action");
  }
}

// Scores an explanation by how many of its numbers actually occur in the
// state, plus a bonus when it quotes a directive that can be re-applied to
// the state and agrees with the decision the explanation reports — checkable
// rule citations beat unverifiable reasoning.
int explanation_score(Domain domain, const Prompt& p, const std::string& explanation,
                      const std::string& state_text) {
  const auto cited = extract_numbers(explanation);
  const auto present = extract_numbers(state_text);
  int matched = 0;
  for (double c : cited) {
    for (double s : present) {
      if (std::fabs(c - s) < 1e-9) {
        ++matched;
        break;
      }
    }
  }
  matched = std::min(matched, 6);
  const auto q1 = explanation.find('"');
  const auto q2 = explanation.rfind('"');
  if (q1 != std::string::npos && q2 != std::string::npos && q2 > q1 + 1) {
    const auto prescribed = prescription(domain, explanation.substr(q1 + 1, q2 - q1 - 1), p);
    const auto stated = stated_action(domain, explanation);
    if (prescribed && stated && *prescribed == *stated) matched += 3;
  }
  return matched;
}

}  // namespace

// ---------------------------------------------------------------------------

ScriptedBackend::ScriptedBackend(ScriptedOptions opts, uint64_t seed)
    : opts_(std::move(opts)), rng_(derive_seed(seed, 0x5c17ed, 0, 0)) {
  opts_.validate();
}

void ScriptedBackend::seed_episode(uint64_t seed) {
  rng_ = Rng(derive_seed(seed, 0x5c17ed, 1, 0));
}

std::string ScriptedBackend::complete(const CompletionRequest& req) {
  const Prompt p = dissect(req.prompt);
  const Domain domain = detect_domain(p);

  // --- judging ---------------------------------------------------------
  if (p.has("ER1: Is the rule alone sufficient")) {
    const std::string block = rule_section(p);
    const bool er1 = er1_actionable(rule_line(block, "Rule:"));
    const bool er2 = er2_relevant(domain, rule_line(block, "Relevance:"), p);
    return std::string("ER1: ") + (er1 ? "yes" : "no") + "\nER2: " + (er2 ? "yes" : "no");
  }
  if (p.has("ER3: Is the action consistent")) {
    const std::string stmt = rule_line(rule_section(p), "Rule:");
    const auto taken = extract_integers(p.section("ACTION TAKEN:"));
    const auto prescribed = prescription(domain, stmt, p);
    const bool ok = prescribed && !taken.empty() && static_cast<int>(taken[0]) == *prescribed;
    return ok ? "yes" : "no";
  }
  if (p.has("Which explanation better justifies")) {
    const std::string state = state_of(p);
    const int a = explanation_score(domain, p, p.section("EXPLANATION A:"), state);
    const int b = explanation_score(domain, p, p.section("EXPLANATION B:"), state);
    if (a > b) return "A";
    if (b > a) return "B";
    return "tie";
  }
  if (p.has("reference facts absent")) {
    // Strip quoted directives first: quoting the decision basis is
    // attribution, not a claim about the state. A remaining number counts as
    // supported when it occurs in the task or state text, or is a plausible
    // action id.
    std::string expl = p.section("EXPLANATION UNDER REVIEW:");
    for (auto q1 = expl.find('"'); q1 != std::string::npos; q1 = expl.find('"')) {
      const auto q2 = expl.find('"', q1 + 1);
      if (q2 == std::string::npos) break;
      expl.erase(q1, q2 - q1 + 1);
    }
    std::vector<double> present = extract_numbers(state_of(p));
    for (double x : extract_numbers(p.section("TASK:"))) present.push_back(x);
    const int num_actions = num_actions_of(domain, p);
    bool fabricated = false;
    for (double c : extract_numbers(expl)) {
      bool ok = c == std::floor(c) && c >= 0 && c < num_actions;
      for (double s : present) {
        if (std::fabs(c - s) < 1e-6) {
          ok = true;
          break;
        }
      }
      if (!ok) {
        fabricated = true;
        break;
      }
    }
    return std::string("hallucinated: ") + (fabricated ? "yes" : "no");
  }

  // --- action selection ------------------------------------------------
  if (p.has("Apply the selected rule")) {
    const std::string stmt = rule_line(p.section("SELECTED RULE:"), "Rule:");
    const int action = prescription(domain, stmt, p).value_or(default_action(domain, p, opts_));
    return action_reply(p, action);
  }
  if (p.has("Based on the analysis, choose one action")) {
    auto lean = lean_of(domain, p.section("ANALYSIS:"), p);
    int action = lean.value_or(default_action(domain, p, opts_));
    // Free-form directives are resolved imperfectly: with probability
    // 1 - thought_accuracy the reply names a uniformly random action.
    if (rng_.uniform() >= opts_.thought_accuracy) {
      action = rng_.uniform_int(0, num_actions_of(domain, p) - 1);
    }
    return action_reply(p, action);
  }
  if (p.has("Select the single best rule")) {
    std::vector<std::string> statements;
    for (const std::string& line : split_lines(p.section("CANDIDATE RULES:"))) {
      const std::string t = trim(line);
      if (t.empty() || t[0] != '[') continue;
      size_t close = t.find(']');
      if (close == std::string::npos) continue;
      statements.push_back(trim(t.substr(close + 1)));
    }
    int best = 0, best_score = -1;
    for (size_t i = 0; i < statements.size(); ++i) {
      int score = er1_actionable(statements[i]) ? 2 : 0;
      if (prescription(domain, statements[i], p).has_value()) score += 1;
      if (score > best_score) {
        best_score = score;
        best = static_cast<int>(i);
      }
    }
    return "{\"rule\": " + std::to_string(best) + "}";
  }

  // --- generation ------------------------------------------------------
  if (p.has("Do not name a final action")) {
    return make_thought(domain, p, opts_);
  }
  if (p.has("candidate decision rules")) {
    int q = 1;
    if (auto n = integer_after(p.full, "Propose")) q = std::max(1, static_cast<int>(*n));
    std::vector<RuleText> lib;
    switch (domain) {
      case Domain::kToy:
        lib = toy_library(parse_toy(p), opts_);
        break;
      case Domain::kHeat:
        lib = heat_library(parse_heat(p));
        break;
      case Domain::kVitals:
        lib = vitals_library(parse_vitals(p));
        break;
      case Domain::kGeneric:
        lib = generic_library();
        break;
    }
    const int start = rng_.uniform_int(0, static_cast<int>(lib.size()) - 1);
    json arr = json::array();
    for (int i = 0; i < q; ++i) {
      const RuleText& r = lib[(start + i) % lib.size()];
      json obj;
      obj["background"] = r.background;
      obj["rule_statement"] = r.rule_statement;
      obj["state_relevance"] = r.state_relevance;
      arr.push_back(obj);
    }
    return arr.dump(2);
  }
  if (p.has("one-sentence analyses")) {
    int q = 1;
    if (auto n = integer_after(p.full, "Propose")) q = std::max(1, static_cast<int>(*n));
    json arr = json::array();
    for (const std::string& c : make_candidates(domain, p, q, opts_, rng_)) arr.push_back(c);
    return arr.dump(2);
  }
  if (p.has("Explain the decision to a human operator")) {
    const std::string stmt = rule_line(p.section("SELECTED RULE:"), "Rule:");
    const auto taken = extract_integers(p.section("ACTION TAKEN:"));
    const int action = taken.empty() ? 0 : static_cast<int>(taken[0]);
    return make_explanation(domain, p, stmt, action);
  }

  throw TransportError("scripted backend: unrecognized request");
}

}  // namespace rbrl
