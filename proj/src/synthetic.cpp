#include "agenther/synthetic.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "agenther/errors.hpp"
#include "agenther/outcome.hpp"
#include "agenther/render.hpp"
#include "agenther/text.hpp"

namespace agenther {

using nlohmann::json;

namespace {

struct Family {
  std::string name;
  std::string slot;  // item | city | use
  std::vector<std::string> slot_values;
  std::vector<std::string> prefixes;
  std::vector<std::string> suffixes;
  std::vector<AttributeSpec> attributes;  // attributes[0] is the price-like one
};

const std::vector<Family>& families() {
  static const std::vector<Family> kFamilies = {
      {"supplier",
       "item",
       {"aluminum", "copper", "titanium", "nickel", "zinc"},
       {"Micro", "Alloy", "Prime", "Nova", "Summit", "Harbor", "Atlas", "Vertex", "Orion", "Crest"},
       {"Metals", "Supply", "Works", "Source", "Trade"},
       {{"price", {"price", "priced", "cost"}, "$", "/kg", 2}, {"moq", {"moq"}, "", " kg", 0}}},
      {"hotel",
       "city",
       {"Lisbon", "Porto", "Madrid", "Vienna", "Prague"},
       {"Harbor", "Sunset", "Garden", "River", "Royal", "Blue", "Park", "Maple"},
       {"Inn", "Lodge", "Suites", "House", "Stay"},
       {{"rate", {"nightly rate", "rate", "price", "priced"}, "$", "/night", 0},
        {"rating", {"rating"}, "", "", 1}}},
      {"laptop",
       "use",
       {"travel", "gaming", "office", "student"},
       {"Aero", "Zen", "Titan", "Swift", "Nimbus", "Pixel"},
       {"Book", "Pad", "Top", "Note"},
       {{"price", {"price", "priced", "cost"}, "$", "", 0},
        {"battery", {"battery life", "battery"}, "", " hours", 1}}},
  };
  return kFamilies;
}

const Family& family_named(std::string_view name) {
  for (const auto& f : families()) {
    if (f.name == name) return f;
  }
  throw std::invalid_argument("unknown task family '" + std::string(name) + "'");
}

struct GoalTemplate {
  std::string id;
  std::string family;
  std::string text;
};

const std::vector<GoalTemplate>& goal_templates() {
  static const std::vector<GoalTemplate> kTemplates = {
      {"supplier_lowest_moq", "supplier", "Identify the {item} supplier with the lowest MOQ and report its price."},
      {"supplier_cheapest", "supplier", "Find the cheapest {item} supplier and report its MOQ."},
      {"supplier_named_price", "supplier", "Report the price per kg that {entity} charges for {item}."},
      {"supplier_price_cap", "supplier", "Find a supplier of {item} with a price of at most ${price}/kg."},
      {"supplier_moq_cap", "supplier", "List the {item} suppliers whose MOQ is at most {moq} kg."},
      {"hotel_best_rated", "hotel", "Find the {city} hotel with the highest rating and report its nightly rate."},
      {"hotel_cheapest", "hotel", "Find the cheapest hotel in {city} and report its rating."},
      {"hotel_named_rate", "hotel", "Report the nightly rate of {entity} in {city}."},
      {"hotel_rating_floor", "hotel", "Find a hotel in {city} with a rating of at least {rating}."},
      {"hotel_lowest_rate", "hotel", "Find the {city} hotel with the lowest nightly rate and report its name."},
      {"laptop_longest_battery", "laptop",
       "Find the {use} laptop with the longest battery life and report its price."},
      {"laptop_cheapest", "laptop", "Find the cheapest {use} laptop and report its battery life."},
      {"laptop_named_battery", "laptop", "Report the battery life of the {entity} {use} laptop."},
      {"laptop_price_cap", "laptop", "Find a {use} laptop with a price of at most ${price}."},
  };
  return kTemplates;
}

// Phrases planted in the final thought, per failure type. Each one hits a
// distinct lexicon term of its own type and nothing else.
const std::map<FailureType, std::vector<std::string>>& planted_phrases() {
  static const std::map<FailureType, std::vector<std::string>> kPhrases = {
      {FailureType::kIncomplete, {"I ran out of steps before writing the summary", "so I did not finish the comparison"}},
      {FailureType::kConstraintViolation,
       {"every offer exceeds the requested limit", "so no option satisfies the constraint"}},
      {FailureType::kWrongResult, {"my tally looks wrong", "and the totals mismatch the listings"}},
      {FailureType::kOffTopic, {"I instead searched for shipping options", "which is irrelevant to the request"}},
      {FailureType::kHallucination, {"I made up a bulk discount", "and there is no evidence for it in the listings"}},
      {FailureType::kToolError, {"the tool call failed on the last lookup", "with a connection refused reply"}},
  };
  return kPhrases;
}

std::string format_value(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

std::string with_units(const AttributeSpec& a, double v) { return a.prefix + format_value(v, a.decimals) + a.suffix; }

// Raw integer range per attribute, scaled by 10^-decimals.
struct Range {
  int lo;
  int hi;
  int step;
};

Range value_range(std::string_view family, std::string_view key) {
  if (family == "supplier") return key == "price" ? Range{350, 1200, 1} : Range{5, 500, 5};
  if (family == "hotel") return key == "rate" ? Range{80, 400, 1} : Range{30, 49, 1};
  return key == "price" ? Range{600, 2500, 1} : Range{40, 180, 1};
}

using Rng = std::mt19937_64;

std::uint64_t draw(Rng& rng, std::uint64_t n) { return rng() % n; }
double draw_unit(Rng& rng) { return text::unit_interval(rng()); }

template <class T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[draw(rng, v.size())];
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::size_t argext(const std::vector<Entity>& es, const std::string& key, bool want_max) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < es.size(); ++i) {
    const double v = es[i].values.at(key);
    const double b = es[best].values.at(key);
    if (want_max ? v > b : v < b) best = i;
  }
  return best;
}

std::string observation_for(const Family& f, const std::string& slot_value, const Entity& e) {
  const auto& a = f.attributes;
  if (f.name == "supplier") {
    return e.name + " lists " + slot_value + " at " + with_units(a[0], e.values.at("price")) + " with an MOQ of " +
           format_value(e.values.at("moq"), 0) + " kg.";
  }
  if (f.name == "hotel") {
    return e.name + " in " + slot_value + ": " + with_units(a[0], e.values.at("rate")) + ", guest rating " +
           format_value(e.values.at("rating"), 1) + ".";
  }
  return e.name + " (" + slot_value + "): " + with_units(a[0], e.values.at("price")) + ", battery life " +
         format_value(e.values.at("battery"), 1) + " hours.";
}

std::string search_observation(const Family& f, const std::string& slot_value, const std::vector<Entity>& es) {
  std::vector<std::string> names;
  for (const auto& e : es) names.push_back(e.name);
  const std::string n = std::to_string(es.size());
  if (f.name == "supplier") return "Found " + n + " " + slot_value + " suppliers: " + join(names, ", ") + ".";
  if (f.name == "hotel") return "Found " + n + " hotels in " + slot_value + ": " + join(names, ", ") + ".";
  return "Found " + n + " " + slot_value + " laptops: " + join(names, ", ") + ".";
}

std::string search_action(const Family& f, const std::string& slot_value) {
  if (f.name == "supplier") return "search(\"" + slot_value + " suppliers\")";
  if (f.name == "hotel") return "search(\"hotels in " + slot_value + "\")";
  return "search(\"" + slot_value + " laptops\")";
}

FailureType sample_type(Rng& rng, const TypeMix& mix) {
  const double u = draw_unit(rng);
  double acc = 0.0;
  FailureType last = FailureType::kIncomplete;
  for (FailureType t : kAllFailureTypes) {
    auto it = mix.find(t);
    const double p = it == mix.end() ? 0.0 : it->second;
    if (p <= 0.0) continue;
    acc += p;
    last = t;
    if (u < acc) return t;
  }
  return last;
}

std::pair<Trajectory, SyntheticTask> generate_one(std::size_t index, std::uint64_t seed, const TypeMix& mix) {
  Rng rng(text::splitmix64(seed ^ text::splitmix64(static_cast<std::uint64_t>(index) + 1)));
  const GoalTemplate& tmpl = pick(rng, goal_templates());
  const Family& fam = family_named(tmpl.family);
  const std::string slot_value = pick(rng, fam.slot_values);
  const FailureType planted = sample_type(rng, mix);

  // Entity table with distinct names and distinct values per column.
  const std::size_t n_entities = 3 + draw(rng, 3);
  std::vector<Entity> entities;
  std::set<std::string> names;
  std::map<std::string, std::set<int>> used;
  while (entities.size() < n_entities) {
    std::string name = pick(rng, fam.prefixes) + pick(rng, fam.suffixes);
    if (!names.insert(name).second) continue;
    Entity e{name, {}};
    for (const auto& a : fam.attributes) {
      const Range r = value_range(fam.name, a.key);
      int raw = 0;
      do {
        raw = r.lo + static_cast<int>(draw(rng, static_cast<std::uint64_t>((r.hi - r.lo) / r.step + 1))) * r.step;
      } while (!used[a.key].insert(raw).second);
      e.values[a.key] = raw / std::pow(10.0, a.decimals);
    }
    entities.push_back(std::move(e));
  }

  const std::string id = "syn-" + std::to_string(index);
  SyntheticTask task;
  task.trajectory_id = id;
  task.template_id = tmpl.id;
  task.family = fam.name;
  task.entities = entities;
  task.planted_failure_type = planted;

  // Original goal: a price cap below every listed price, plus a second
  // condition for flavor.
  const AttributeSpec& a0 = fam.attributes[0];
  const double min_price = entities[argext(entities, a0.key, false)].values.at(a0.key);
  const double scale = std::pow(10.0, a0.decimals);
  const double cap = std::max(1.0 / scale, std::floor(min_price * 0.8 * scale) / scale);
  task.original_constraint.push_back({a0.key, Comparator::kLess, cap});
  const std::string cap_text = format_value(cap, a0.decimals);
  if (fam.name == "supplier") {
    const int moq = 5 + static_cast<int>(draw(rng, 46));
    task.original_constraint.push_back({"moq", Comparator::kLessEqual, static_cast<double>(moq)});
    task.original_goal = "Find a supplier of " + slot_value + " with a price under $" + cap_text +
                         "/kg and an MOQ of at most " + std::to_string(moq) + " kg.";
  } else if (fam.name == "hotel") {
    const double rating = (45 + static_cast<int>(draw(rng, 5))) / 10.0;
    task.original_constraint.push_back({"rating", Comparator::kGreaterEqual, rating});
    task.original_goal = "Book a hotel in " + slot_value + " with a nightly rate under $" + cap_text +
                         " and a rating of at least " + format_value(rating, 1) + ".";
  } else {
    const int hours = 8 + static_cast<int>(draw(rng, 13));
    task.original_constraint.push_back({"battery", Comparator::kGreaterEqual, static_cast<double>(hours)});
    task.original_goal = "Buy a " + slot_value + " laptop with a price under $" + cap_text +
                         " and a battery life of at least " + std::to_string(hours) + " hours.";
  }

  // Ground truth from the template; threshold slots use an observed value.
  const Entity& chosen = entities[draw(rng, entities.size())];
  Bindings b{{fam.slot, slot_value}, {"entity", chosen.name}};
  for (const auto& a : fam.attributes) b[a.key] = format_value(chosen.values.at(a.key), a.decimals);
  task.ground_truth_goal = render_text(tmpl.text, b);

  Trajectory traj;
  traj.id = id;
  traj.goal = task.original_goal;
  int idx = 0;
  traj.steps.push_back({++idx, "Search for candidate listings.", search_action(fam, slot_value),
                        search_observation(fam, slot_value, entities), false});
  for (const auto& e : entities) {
    traj.steps.push_back({++idx, "Check the listing for " + e.name + ".", "open_listing(\"" + e.name + "\")",
                          observation_for(fam, slot_value, e), false});
  }
  if (planted == FailureType::kToolError) {
    traj.steps.push_back({++idx, "Retry the last lookup.", "open_listing(\"" + entities.back().name + "\")",
                          "Error: connection refused by the listing service.", false});
  }
  const auto& phrases = planted_phrases().at(planted);
  const std::size_t h = 1 + draw(rng, phrases.size());
  std::vector<std::string> used_phrases(phrases.begin(), phrases.begin() + static_cast<std::ptrdiff_t>(h));
  std::string final_thought = join(used_phrases, ", ") + ".";
  final_thought[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(final_thought[0])));
  traj.steps.push_back({++idx, final_thought, "finish()", "", true});
  return {std::move(traj), std::move(task)};
}

// --- oracle ---------------------------------------------------------------

struct Hit {
  std::size_t pos;
  std::size_t len;
};

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

// Word-bounded occurrences of `needle` in `hay`.
std::vector<Hit> find_words(std::string_view hay, std::string_view needle) {
  std::vector<Hit> out;
  for (std::size_t p = hay.find(needle); p != std::string_view::npos; p = hay.find(needle, p + 1)) {
    const bool left = p == 0 || !is_word_char(hay[p - 1]);
    const std::size_t end = p + needle.size();
    const bool right = end >= hay.size() || !is_word_char(hay[end]);
    if (left && right) out.push_back({p, needle.size()});
  }
  return out;
}

struct ComparatorPhrase {
  const char* text;
  Comparator op;
};

constexpr ComparatorPhrase kComparators[] = {
    {"no more than", Comparator::kLessEqual}, {"no less than", Comparator::kGreaterEqual},
    {"less than", Comparator::kLess},         {"more than", Comparator::kGreater},
    {"at most", Comparator::kLessEqual},      {"at least", Comparator::kGreaterEqual},
    {"under", Comparator::kLess},             {"below", Comparator::kLess},
    {"over", Comparator::kGreater},           {"above", Comparator::kGreater},
};

struct Superlative {
  const char* word;
  bool want_max;
};

constexpr Superlative kSuperlatives[] = {
    {"lowest", false}, {"smallest", false}, {"shortest", false},
    {"highest", true}, {"largest", true},   {"longest", true},
};

bool compare(double v, Comparator op, double t) {
  switch (op) {
    case Comparator::kLess: return v < t;
    case Comparator::kLessEqual: return v <= t;
    case Comparator::kGreater: return v > t;
    case Comparator::kGreaterEqual: return v >= t;
  }
  return false;
}

bool is_camel_case(std::string_view w) {
  if (w.size() < 3 || !std::isupper(static_cast<unsigned char>(w[0]))) return false;
  bool seen_lower = false;
  for (std::size_t i = 1; i < w.size(); ++i) {
    const auto c = static_cast<unsigned char>(w[i]);
    if (std::islower(c)) seen_lower = true;
    if (std::isupper(c) && seen_lower) return true;
  }
  return false;
}

// Attribute whose alias occurrence ends closest before `pos`.
const AttributeSpec* alias_before(std::string_view lower, std::size_t pos, const Family& fam) {
  const AttributeSpec* best = nullptr;
  std::size_t best_end = 0;
  for (const auto& a : fam.attributes) {
    for (const auto& alias : a.aliases) {
      for (const Hit& h : find_words(lower.substr(0, pos), alias)) {
        if (!best || h.pos + h.len > best_end) {
          best = &a;
          best_end = h.pos + h.len;
        }
      }
    }
  }
  return best;
}

// Attribute named right after `pos` (within a few characters).
const AttributeSpec* alias_after(std::string_view lower, std::size_t pos, const Family& fam) {
  std::size_t p = pos;
  while (p < lower.size() && lower[p] == ' ') ++p;
  const AttributeSpec* best = nullptr;
  std::size_t best_len = 0;
  for (const auto& a : fam.attributes) {
    for (const auto& alias : a.aliases) {
      if (lower.compare(p, alias.size(), alias) == 0) {
        const std::size_t end = p + alias.size();
        if ((end >= lower.size() || !is_word_char(lower[end])) && alias.size() > best_len) {
          best = &a;
          best_len = alias.size();
        }
      }
    }
  }
  return best;
}

std::string json_type(FailureType t) { return to_string(t); }

}  // namespace

// ---------------------------------------------------------------------------

const std::vector<AttributeSpec>& family_attributes(std::string_view family) {
  return family_named(family).attributes;
}

const std::vector<std::string>& canonical_goal_templates() {
  static const std::vector<std::string> kTexts = [] {
    std::vector<std::string> v;
    for (const auto& t : goal_templates()) v.push_back(t.text);
    return v;
  }();
  return kTexts;
}

TypeMix uniform_type_mix() {
  TypeMix m;
  for (FailureType t : kAllFailureTypes) m[t] = 1.0 / static_cast<double>(kAllFailureTypes.size());
  return m;
}

void validate_type_mix(const TypeMix& mix) {
  double sum = 0.0;
  for (const auto& [t, p] : mix) {
    if (!std::isfinite(p) || p < 0.0) throw ConfigError("type mix: proportion for " + to_string(t) + " is negative");
    sum += p;
  }
  if (std::fabs(sum - 1.0) > 1e-9) {
    std::ostringstream ss;
    ss.precision(17);
    ss << "type mix: proportions sum to " << sum << ", expected 1";
    throw ConfigError(ss.str());
  }
}

TypeMix parse_type_mix(std::string_view spec) {
  TypeMix mix;
  double named = 0.0;
  std::string s(spec);
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string trimmed(text::trim(item));
    if (trimmed.empty() || trimmed == "rest") continue;
    const auto colon = trimmed.find(':');
    if (colon == std::string::npos) throw ConfigError("type mix: expected type:proportion, got '" + trimmed + "'");
    FailureType t;
    try {
      t = parse_failure_type(std::string(text::trim(trimmed.substr(0, colon))));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("type mix: ") + e.what());
    }
    double p = 0.0;
    try {
      std::size_t used = 0;
      const std::string num(text::trim(trimmed.substr(colon + 1)));
      p = std::stod(num, &used);
      if (used != num.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw ConfigError("type mix: bad proportion in '" + trimmed + "'");
    }
    if (mix.count(t)) throw ConfigError("type mix: " + to_string(t) + " given twice");
    mix[t] = p;
    named += p;
  }
  std::vector<FailureType> rest;
  for (FailureType t : kAllFailureTypes) {
    if (!mix.count(t)) rest.push_back(t);
  }
  for (FailureType t : rest) mix[t] = std::max(0.0, 1.0 - named) / static_cast<double>(rest.size());
  validate_type_mix(mix);
  return mix;
}

SyntheticCorpus generate_corpus(std::size_t n, std::uint64_t seed, const TypeMix& mix) {
  validate_type_mix(mix);
  SyntheticCorpus out;
  out.trajectories.reserve(n);
  out.tasks.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto [traj, task] = generate_one(i, seed, mix);
    out.trajectories.push_back(std::move(traj));
    out.tasks.push_back(std::move(task));
  }
  return out;
}

OracleVerdict oracle_check(std::string_view goal, const SyntheticTask& task) {
  const Family& fam = family_named(task.family);
  const std::string lower = text::to_lower_ascii(goal);
  std::vector<std::size_t> candidates(task.entities.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i] = i;
  int claims = 0;
  auto keep = [&](auto pred) {
    std::vector<std::size_t> next;
    for (std::size_t i : candidates) {
      if (pred(task.entities[i])) next.push_back(i);
    }
    candidates = std::move(next);
  };

  // Entity mentions, and CamelCase names that are not in the table.
  for (const auto& raw : text::split_words(goal)) {
    std::string w;
    for (char c : raw) {
      if (std::isalnum(static_cast<unsigned char>(c))) w += c;
    }
    if (!is_camel_case(w)) continue;
    const bool known = std::any_of(task.entities.begin(), task.entities.end(),
                                   [&](const Entity& e) { return e.name == w; });
    if (!known) return {false, "unknown entity " + w};
  }
  for (const auto& e : task.entities) {
    if (find_words(goal, e.name).empty()) continue;
    ++claims;
    keep([&](const Entity& x) { return x.name == e.name; });
  }

  // Superlatives.
  auto superlative = [&](const AttributeSpec& a, bool want_max) {
    ++claims;
    const std::string name = task.entities[argext(task.entities, a.key, want_max)].name;
    keep([&](const Entity& x) { return x.name == name; });
  };
  for (const auto& s : kSuperlatives) {
    for (const Hit& h : find_words(lower, s.word)) {
      const AttributeSpec* a = alias_after(lower, h.pos + h.len, fam);
      if (!a) return {false, std::string("cannot tell what '") + s.word + "' refers to"};
      superlative(*a, s.want_max);
    }
  }
  for (const Hit& h : find_words(lower, "cheapest")) {
    (void)h;
    superlative(fam.attributes[0], false);
  }
  for (const Hit& h : find_words(lower, "most expensive")) {
    (void)h;
    superlative(fam.attributes[0], true);
  }

  // Number positions, so thresholds can claim theirs.
  const auto tokens = text::numeric_tokens(goal);
  std::vector<Hit> number_hits;
  {
    std::size_t cursor = 0;
    for (const auto& tok : tokens) {
      const auto p = goal.find(tok, cursor);
      number_hits.push_back({p, tok.size()});
      cursor = p + tok.size();
    }
  }
  std::vector<bool> consumed(tokens.size(), false);

  // Thresholds. Longer phrases first; overlapping shorter ones are skipped.
  std::vector<Hit> taken;
  for (const auto& c : kComparators) {
    for (const Hit& h : find_words(lower, c.text)) {
      const bool overlaps = std::any_of(taken.begin(), taken.end(), [&](const Hit& t) {
        return h.pos < t.pos + t.len && t.pos < h.pos + h.len;
      });
      if (overlaps) continue;
      taken.push_back(h);
      std::size_t p = h.pos + h.len;
      while (p < goal.size() && (goal[p] == ' ' || goal[p] == '$')) ++p;
      std::size_t which = tokens.size();
      for (std::size_t k = 0; k < tokens.size(); ++k) {
        if (number_hits[k].pos == p || (number_hits[k].pos == p + 1 && (goal[p] == '-' || goal[p] == '+'))) which = k;
      }
      if (which == tokens.size()) return {false, std::string("no number after '") + c.text + "'"};
      const AttributeSpec* a = alias_before(lower, h.pos, fam);
      if (!a) return {false, std::string("cannot tell what '") + c.text + "' compares"};
      consumed[which] = true;
      ++claims;
      const double t = text::parse_number(tokens[which]);
      keep([&](const Entity& x) { return compare(x.values.at(a->key), c.op, t); });
    }
  }

  // Bare numbers must be a value of the entity the goal is about.
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    if (consumed[k]) continue;
    ++claims;
    const std::string want = text::canonical_number(tokens[k]);
    keep([&](const Entity& x) {
      for (const auto& a : fam.attributes) {
        if (text::canonical_number(format_value(x.values.at(a.key), a.decimals)) == want) return true;
      }
      return false;
    });
  }

  if (claims == 0) return {false, "no checkable claim"};
  if (candidates.empty()) return {false, "no entity satisfies every claim"};
  return {true, "holds for " + task.entities[candidates.front()].name};
}

bool oracle_valid(std::string_view goal, const SyntheticTask& task) { return oracle_check(goal, task).valid; }

std::string corrupt_goal(const SyntheticTask& task, std::uint64_t salt) {
  const Family& fam = family_named(task.family);
  const AttributeSpec& a = fam.attributes[0];
  const std::size_t best = argext(task.entities, a.key, false);
  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < task.entities.size(); ++i) {
    if (i != best) others.push_back(i);
  }
  if (others.empty()) throw DataError("corrupt_goal: task '" + task.trajectory_id + "' has a single entity");
  const Entity& wrong = task.entities[others[text::splitmix64(salt) % others.size()]];
  return "Confirm that " + wrong.name + " offers the lowest " + a.aliases.front() + " in this search.";
}

// ---------------------------------------------------------------------------

json to_json(const SyntheticTask& t) {
  json entities = json::array();
  for (const auto& e : t.entities) entities.push_back({{"name", e.name}, {"values", e.values}});
  json constraints = json::array();
  for (const auto& c : t.original_constraint) {
    static const char* kOps[] = {"<", "<=", ">", ">="};
    constraints.push_back({{"attribute", c.attribute}, {"op", kOps[static_cast<int>(c.op)]}, {"value", c.value}});
  }
  return {{"trajectory_id", t.trajectory_id},
          {"template_id", t.template_id},
          {"family", t.family},
          {"entity_table", std::move(entities)},
          {"original_constraint", std::move(constraints)},
          {"original_goal", t.original_goal},
          {"ground_truth_goal", t.ground_truth_goal},
          {"planted_failure_type", json_type(t.planted_failure_type)}};
}

SyntheticTask task_from_json(const json& j) {
  try {
    SyntheticTask t;
    t.trajectory_id = j.at("trajectory_id").get<std::string>();
    t.template_id = j.value("template_id", std::string());
    t.family = j.at("family").get<std::string>();
    family_named(t.family);
    for (const auto& e : j.at("entity_table")) {
      t.entities.push_back({e.at("name").get<std::string>(), e.at("values").get<std::map<std::string, double>>()});
    }
    for (const auto& c : j.value("original_constraint", json::array())) {
      const std::string op = c.at("op").get<std::string>();
      Comparator cmp = op == "<"    ? Comparator::kLess
                       : op == "<=" ? Comparator::kLessEqual
                       : op == ">"  ? Comparator::kGreater
                       : op == ">=" ? Comparator::kGreaterEqual
                                    : throw DataError("unknown comparator '" + op + "'");
      t.original_constraint.push_back({c.at("attribute").get<std::string>(), cmp, c.at("value").get<double>()});
    }
    t.original_goal = j.value("original_goal", std::string());
    t.ground_truth_goal = j.at("ground_truth_goal").get<std::string>();
    t.planted_failure_type = parse_failure_type(j.at("planted_failure_type").get<std::string>());
    return t;
  } catch (const json::exception& e) {
    throw DataError(std::string("task record: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("task record: ") + e.what());
  }
}

std::string serialize_tasks(const std::vector<SyntheticTask>& tasks) {
  std::string out;
  for (const auto& t : tasks) out += to_json(t).dump() + "\n";
  return out;
}

void write_tasks(const std::vector<SyntheticTask>& tasks, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << serialize_tasks(tasks);
}

std::vector<SyntheticTask> read_tasks(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<SyntheticTask> tasks;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw ParseError("invalid JSON", line_no, 0);
    tasks.push_back(task_from_json(j));
  }
  return tasks;
}

// ---------------------------------------------------------------------------

Transcript build_oracle_transcript(const SyntheticCorpus& corpus, const PipelineConfig& cfg,
                                   const OracleTranscriptOptions& opts, const Lexicon& lexicon) {
  if (corpus.trajectories.size() != corpus.tasks.size()) throw DataError("corpus and tasks differ in length");
  if (!(opts.noise >= 0.0 && opts.noise <= 1.0)) throw ConfigError("noise must be in [0, 1]");
  if (!(opts.corruption_rate >= 0.0 && opts.corruption_rate <= 1.0)) {
    throw ConfigError("corruption rate must be in [0, 1]");
  }
  Transcript t;
  for (std::size_t i = 0; i < corpus.trajectories.size(); ++i) {
    const Trajectory& traj = corpus.trajectories[i];
    const SyntheticTask& task = corpus.tasks[i];
    if (traj.id != task.trajectory_id) throw DataError("corpus and tasks are not aligned at " + traj.id);
    const ReplayOutcome outcome = extract_rule(traj, lexicon);
    if (outcome.empty()) continue;
    const std::string stage3 = render_template(
        TemplateId::kStage3, {{"outcome", render_outcome(outcome)}, {"original_prompt", traj.goal}});
    const std::string fp3 = fingerprint(TemplateId::kStage3, stage3);
    const std::string traj_text = trajectory_text(traj);

    for (int k = 1; k <= cfg.max_retries; ++k) {
      const std::uint64_t h =
          text::splitmix64(opts.seed ^ text::fnv1a64(traj.id) ^ text::splitmix64(static_cast<std::uint64_t>(k)));
      auto u = [&](std::uint64_t j) { return text::unit_interval(text::splitmix64(h + j)); };
      const bool corrupted = u(1) < opts.corruption_rate;
      const std::string goal = corrupted ? corrupt_goal(task, h) : task.ground_truth_goal;
      const bool truth = oracle_valid(goal, task);

      const bool v1 = truth != (u(2) < opts.noise);
      const double c1 = v1 ? 0.6 + 0.4 * u(3) : 0.1 + 0.3 * u(3);
      json r1 = {{"hindsight_prompt", goal},
                 {"is_valid", v1},
                 {"rationale", corrupted ? "oracle: corrupted proposal" : "oracle: ground truth"},
                 {"confidence", c1}};
      t.add({fp3, k, r1.dump()});

      const bool v2 = truth != (u(4) < opts.noise);
      const double c2 = v2 ? 0.6 + 0.4 * u(5) : 0.1 + 0.3 * u(5);
      json r2 = {{"is_valid", v2}, {"confidence", c2}, {"rejection_reason_if_any", v2 ? "" : "oracle: claim fails"}};
      const std::string second = render_template(TemplateId::kSecondJudge,
                                                 {{"hindsight_prompt", goal}, {"trajectory", traj_text}});
      t.add({fingerprint(TemplateId::kSecondJudge, second), k, r2.dump()});
    }
  }
  return t;
}

std::vector<ScoredDecision> scored_decisions(const std::vector<TrajectoryResult>& results) {
  std::vector<ScoredDecision> out;
  out.reserve(results.size());
  for (const auto& r : results) {
    ScoredDecision d{r.id, r.status == TrajectoryStatus::kAccepted, {}};
    if (d.accepted) d.hindsight_prompt = r.decision->hindsight_prompt;
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<ScoredDecision> read_decisions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<ScoredDecision> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw ParseError("invalid JSON", line_no, 0);
    try {
      ScoredDecision d;
      d.trajectory_id = j.at("trajectory_id").get<std::string>();
      d.accepted = j.at("status").get<std::string>() == "accepted";
      if (d.accepted) d.hindsight_prompt = j.at("decision").at("hindsight_prompt").get<std::string>();
      out.push_back(std::move(d));
    } catch (const json::exception& e) {
      throw DataError("decisions line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

ScoreReport score_pipeline(const std::vector<ScoredDecision>& decisions, const std::vector<SyntheticTask>& tasks) {
  std::map<std::string, const SyntheticTask*> by_id;
  for (const auto& t : tasks) {
    if (!by_id.emplace(t.trajectory_id, &t).second) throw DataError("duplicate task id " + t.trajectory_id);
  }
  std::set<std::string> seen;
  ScoreReport rep;
  for (const auto& t : tasks) {
    auto& ts = rep.per_type[t.planted_failure_type];
    ++ts.planted;
    if (!is_major(t.planted_failure_type)) {
      ++ts.relabelable;
      ++rep.relabelable;
    }
  }
  for (const auto& d : decisions) {
    auto it = by_id.find(d.trajectory_id);
    if (it == by_id.end()) throw DataError("decision for unknown task " + d.trajectory_id);
    if (!seen.insert(d.trajectory_id).second) throw DataError("two decisions for " + d.trajectory_id);
    if (!d.accepted) continue;
    auto& ts = rep.per_type[it->second->planted_failure_type];
    ++rep.accepted;
    ++ts.accepted;
    if (oracle_valid(d.hindsight_prompt, *it->second)) {
      ++rep.valid_accepted;
      ++ts.valid_accepted;
    }
  }
  if (seen.size() != tasks.size()) {
    throw DataError("decisions cover " + std::to_string(seen.size()) + " of " + std::to_string(tasks.size()) +
                    " tasks");
  }
  if (rep.accepted > 0) rep.precision = static_cast<double>(rep.valid_accepted) / static_cast<double>(rep.accepted);
  if (rep.relabelable > 0) {
    std::size_t valid_relabelable = 0;
    for (const auto& [type, ts] : rep.per_type) {
      if (!is_major(type)) valid_relabelable += ts.valid_accepted;
    }
    rep.recall = static_cast<double>(valid_relabelable) / static_cast<double>(rep.relabelable);
  }
  return rep;
}

json ScoreReport::to_json() const {
  json types = json::object();
  for (const auto& [type, ts] : per_type) {
    types[agenther::to_string(type)] = {{"planted", ts.planted},
                                        {"relabelable", ts.relabelable},
                                        {"accepted", ts.accepted},
                                        {"valid_accepted", ts.valid_accepted}};
  }
  return {{"accepted", accepted},   {"valid_accepted", valid_accepted}, {"relabelable", relabelable},
          {"precision", precision}, {"recall", recall},                 {"per_failure_type", std::move(types)}};
}

std::string ScoreReport::table() const {
  std::ostringstream ss;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "precision %.4f (%zu/%zu)  recall %.4f (of %zu relabelable)\n", precision,
                valid_accepted, accepted, recall, relabelable);
  ss << buf;
  std::snprintf(buf, sizeof(buf), "  %-22s %8s %8s %8s %8s\n", "type", "planted", "relab.", "accepted", "valid");
  ss << buf;
  for (const auto& [type, ts] : per_type) {
    std::snprintf(buf, sizeof(buf), "  %-22s %8zu %8zu %8zu %8zu\n", agenther::to_string(type).c_str(), ts.planted,
                  ts.relabelable, ts.accepted, ts.valid_accepted);
    ss << buf;
  }
  return ss.str();
}

}  // namespace agenther
