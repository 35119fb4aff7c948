#include "xview/qa.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "xview/errors.hpp"
#include "xview/scene_io.hpp"

namespace xview::qa {

namespace {

// generation margins; derive_gold applies the same class boundaries
constexpr double kVfMargin = 0.15;
constexpr double kDispMarginPx = 10.0;
constexpr double kDepthMargin = 0.15;
constexpr double kScaleLarger = 1.3;
constexpr double kScaleSmaller = 0.77;
constexpr double kSimilarLo = 0.9;
constexpr double kSimilarHi = 1.1;
constexpr double kGrowthRatio = 1.25;

const std::vector<std::string> kCandidate4 = {"the first candidate", "the second candidate",
                                              "the third candidate", "the fourth candidate"};
const std::vector<std::string> kCandidate2 = {"the first candidate", "the second candidate"};
const std::vector<std::string> kCandidate3None = {"the first candidate", "the second candidate",
                                                  "the third candidate", "none of the candidates"};
const std::vector<std::string> kRegion4 = {"the first region", "the second region",
                                           "the third region", "the fourth region"};
const std::vector<std::string> kRegion2 = {"the first region", "the second region"};
const std::vector<std::string> kYesNo = {"yes", "no"};

}  // namespace

const std::vector<TaskSpec>& task_specs() {
  static const std::vector<TaskSpec> specs = {
      {1,
       {"In view a, focus on <region>. Which region in view b shows the same object: <region>, "
        "<region>, <region>, or <region>?",
        "Which of these view b regions matches the object <region> from view a? The candidates "
        "are <region>, <region>, <region>, <region>."},
       kCandidate4,
       false},
      {2,
       {"Look at <region> in view a. Which region in view b shows the same object: <region> or "
        "<region>?",
        "The object <region> from view a appears in view b as which of these: <region> or "
        "<region>?"},
       kCandidate2,
       false},
      {3,
       {"Consider <region> in view a. Which of these view b regions shows the same object, if "
        "any: <region>, <region>, <region>?",
        "Does any of these view b regions match <region> from view a: <region>, <region>, "
        "<region>?"},
       kCandidate3None,
       false},
      {4,
       {"In view a, take the group <region> and <region>. In view b, take <region> and <region>. "
        "How do the two groups correspond?",
        "Compare the pair <region> and <region> from view a with the pair <region> and <region> "
        "in view b. How do they match up?"},
       {"they match in the same order", "they match in swapped order", "only one object matches",
        "nothing matches"},
       false},
      {5,
       {"Do <region> in view a and <region> in view b show the same physical object?",
        "Is the object <region> in view a the same one as <region> in view b?"},
       kYesNo,
       true},
      {6,
       {"Is the object shown by <region> in view a also visible in view b?",
        "Can the object marked <region> in view a be seen anywhere in view b?"},
       kYesNo,
       true},
      {7,
       {"Which of these view a regions shows an object that is not visible in view b: <region>, "
        "<region>, <region>, <region>?",
        "Exactly one of these objects from view a is missing in view b. Which one is it: "
        "<region>, <region>, <region>, <region>?"},
       kRegion4,
       false},
      {8,
       {"Part of <region> is hidden in view a. Which region shows the object hiding it: "
        "<region>, <region>, <region>, <region>?",
        "The object <region> is partially covered in view a. Which of these regions covers it: "
        "<region>, <region>, <region>, <region>?"},
       kRegion4,
       false},
      {9,
       {"In view a, find the object closest to <region> on screen. Which view b region shows "
        "that closest object: <region>, <region>, <region>, <region>?",
        "Take the nearest neighbour of <region> in view a. In view b it appears as which region: "
        "<region>, <region>, <region>, <region>?"},
       kCandidate4,
       false},
      {10,
       {"The object <region> appears in view a. How does its projected size change in view b?",
        "Compare the apparent size of <region> between view a and view b. What happens?"},
       {"it looks larger in view b", "it looks smaller in view b", "its size looks similar",
        "it is not visible in view b"},
       false},
      {11,
       {"Within view a, which object is more completely visible: <region> or <region>?",
        "In view a, which of <region> and <region> shows a larger fraction of its object?"},
       kRegion2,
       false},
      {12,
       {"<region> in view a and <region> in view b show the same object. In which view is it "
        "more completely visible?",
        "The same object appears as <region> in view a and <region> in view b. Where is more of "
        "it visible?"},
       {"view a", "view b"},
       true},
      {13,
       {"In view a, consider <region> and <region>. In view b they appear as <region> and "
        "<region>. Does their left-right order flip between the views?",
        "Compare the horizontal arrangement of <region> and <region> in view a with <region> and "
        "<region> in view b. Is the left-right order reversed?"},
       kYesNo,
       true},
      {14,
       {"Between view a and view b, which object's position on screen changes more: <region> or "
        "<region>?",
        "From view a to view b, which of <region> and <region> moves farther in the image?"},
       kRegion2,
       false},
      {15,
       {"In view a, <region> is closer to the camera than <region>. Looking at <region> and "
        "<region> in view b, does the same depth order hold?",
        "<region> sits in front of <region> in view a. Do <region> and <region> keep that depth "
        "order in view b?"},
       kYesNo,
       true},
      {16,
       {"Going from view a to view b, which object's projected size grows more: <region> or "
        "<region>?",
        "Which of <region> and <region> gains more apparent size from view a to view b?"},
       kRegion2,
       false},
      {17,
       {"In view a, <region> and <region> overlap visually. Are the two objects in physical "
        "contact?",
        "The regions <region> and <region> overlap on screen in view a. Do the objects actually "
        "touch?"},
       kYesNo,
       true}};
  return specs;
}

TaskCategory task_category(int task_id) {
  if (task_id >= 1 && task_id <= 5) return TaskCategory::kCorrespondence;
  if (task_id >= 6 && task_id <= 8) return TaskCategory::kVisOcc;
  if (task_id >= 9 && task_id <= 16) return TaskCategory::kGeometric;
  if (task_id == 17) return TaskCategory::kPhysical;
  throw ConfigError("unknown task id " + std::to_string(task_id));
}

std::string task_category_name(TaskCategory cat) {
  switch (cat) {
    case TaskCategory::kCorrespondence: return "Correspondence";
    case TaskCategory::kVisOcc: return "Vis/Occ";
    case TaskCategory::kGeometric: return "Geometric";
    case TaskCategory::kPhysical: return "Physical";
  }
  return "?";
}

std::string task_name(int task_id) { return "Q" + std::to_string(task_id); }

int task_option_count(int task_id) {
  return static_cast<int>(task_specs()[task_id - 1].options.size());
}

std::vector<std::string> template_vocabulary() {
  std::set<std::string> words;
  auto absorb = [&](const std::string& text) {
    std::string cur;
    for (char raw : text) {
      const unsigned char uc = static_cast<unsigned char>(raw);
      if (std::isalnum(uc)) {
        cur.push_back(static_cast<char>(std::tolower(uc)));
      } else {
        if (!cur.empty()) words.insert(cur);
        cur.clear();
        if (!std::isspace(uc)) words.insert(std::string(1, static_cast<char>(std::tolower(uc))));
      }
    }
    if (!cur.empty()) words.insert(cur);
  };
  for (const auto& spec : task_specs()) {
    for (const auto& t : spec.templates) absorb(t);
    for (const auto& o : spec.options) absorb(o);
  }
  return std::vector<std::string>(words.begin(), words.end());
}

namespace {

struct PairCtx {
  const scene::Scene& sc;
  const scene::RelationRecords& rel;
  int va, vb;

  std::vector<int64_t> tracks(int view) const {
    std::vector<int64_t> out;
    for (const auto& p : sc.projections[view]) out.push_back(p.track_id);
    return out;
  }
  bool in_view(int view, int64_t track) const { return sc.find_projection(view, track) >= 0; }
  RegionRef ref(int view, int64_t track) const {
    return {view, sc.find_projection(view, track)};
  }
  const scene::ProjectedInstance& proj(int view, int64_t track) const {
    return sc.projections[view][sc.find_projection(view, track)];
  }
};

template <typename T>
std::vector<T> sample_distinct(std::vector<T> pool, size_t k, Rng& rng) {
  for (size_t i = 0; i < k && i < pool.size(); ++i) {
    const size_t j = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(std::min(k, pool.size()));
  return pool;
}

template <typename T>
void shuffle_vec(std::vector<T>& v, Rng& rng) {
  for (size_t i = 0; i + 1 < v.size(); ++i) {
    const size_t j = i + rng.below(v.size() - i);
    std::swap(v[i], v[j]);
  }
}

int find_option(const std::vector<std::string>& options, const std::string& text) {
  for (size_t i = 0; i < options.size(); ++i)
    if (options[i] == text) return static_cast<int>(i);
  return -1;
}

std::optional<int64_t> gold_occluder(const scene::ProjectedInstance& p) {
  std::optional<int64_t> best;
  int stolen = -1;
  for (const auto& oc : p.occluders) {
    if (oc.stolen_pixels > stolen ||
        (oc.stolen_pixels == stolen && best && oc.track_id < *best)) {
      stolen = oc.stolen_pixels;
      best = oc.track_id;
    }
  }
  return best;
}

// attempts below return a partially filled sample (question text, options and
// sample id added by the caller); nullopt when no fixture exists
struct Draft {
  std::vector<RegionRef> refs;
  int gold = -1;
  std::string gold_class;
};

std::optional<Draft> attempt_q1(const PairCtx& c, Rng& rng, int n_candidates) {
  std::vector<int64_t> eligible;
  for (int64_t t : c.tracks(c.va))
    if (c.in_view(c.vb, t) && static_cast<int>(c.tracks(c.vb).size()) >= n_candidates)
      eligible.push_back(t);
  if (eligible.empty()) return std::nullopt;
  const int64_t target = eligible[rng.below(eligible.size())];
  std::vector<int64_t> others;
  for (int64_t t : c.tracks(c.vb))
    if (t != target) others.push_back(t);
  if (static_cast<int>(others.size()) < n_candidates - 1) return std::nullopt;
  auto distractors = sample_distinct(others, n_candidates - 1, rng);
  std::vector<int64_t> candidates{target};
  candidates.insert(candidates.end(), distractors.begin(), distractors.end());
  shuffle_vec(candidates, rng);
  Draft d;
  d.refs.push_back(c.ref(c.va, target));
  for (int64_t t : candidates) d.refs.push_back(c.ref(c.vb, t));
  for (size_t i = 0; i < candidates.size(); ++i)
    if (candidates[i] == target) d.gold = static_cast<int>(i);
  return d;
}

std::optional<Draft> attempt_q3(const PairCtx& c, Rng& rng) {
  const auto tb = c.tracks(c.vb);
  std::vector<int64_t> match_targets, none_targets;
  for (int64_t t : c.tracks(c.va)) {
    int others = 0;
    for (int64_t u : tb) others += (u != t) ? 1 : 0;
    if (c.in_view(c.vb, t) && others >= 2) match_targets.push_back(t);
    if (others >= 3) none_targets.push_back(t);
  }
  const bool can_match = !match_targets.empty();
  const bool can_none = !none_targets.empty();
  if (!can_match && !can_none) return std::nullopt;
  bool want_none = can_none && (!can_match || rng.below(4) == 0);
  Draft d;
  if (want_none) {
    const int64_t target = none_targets[rng.below(none_targets.size())];
    std::vector<int64_t> others;
    for (int64_t u : tb)
      if (u != target) others.push_back(u);
    auto candidates = sample_distinct(others, 3, rng);
    shuffle_vec(candidates, rng);
    d.refs.push_back(c.ref(c.va, target));
    for (int64_t t : candidates) d.refs.push_back(c.ref(c.vb, t));
    d.gold = 3;
  } else {
    const int64_t target = match_targets[rng.below(match_targets.size())];
    std::vector<int64_t> others;
    for (int64_t u : tb)
      if (u != target) others.push_back(u);
    auto distractors = sample_distinct(others, 2, rng);
    std::vector<int64_t> candidates{target};
    candidates.insert(candidates.end(), distractors.begin(), distractors.end());
    shuffle_vec(candidates, rng);
    d.refs.push_back(c.ref(c.va, target));
    for (int64_t t : candidates) d.refs.push_back(c.ref(c.vb, t));
    for (size_t i = 0; i < candidates.size(); ++i)
      if (candidates[i] == target) d.gold = static_cast<int>(i);
  }
  return d;
}

std::optional<Draft> attempt_q4(const PairCtx& c, Rng& rng) {
  const auto& options = task_specs()[3].options;
  const auto ta = c.tracks(c.va);
  const auto tb = c.tracks(c.vb);
  if (ta.size() < 2 || tb.size() < 2) return std::nullopt;

  std::vector<int64_t> both;
  for (int64_t t : ta)
    if (c.in_view(c.vb, t)) both.push_back(t);
  std::vector<int64_t> b_only;
  for (int64_t t : tb)
    if (std::find(ta.begin(), ta.end(), t) == ta.end()) b_only.push_back(t);

  std::vector<int> cases;
  if (both.size() >= 2) {
    cases.push_back(0);
    cases.push_back(1);
  }
  if (!both.empty() && tb.size() >= 2) cases.push_back(2);
  if (b_only.size() >= 2 || (b_only.size() >= 1 && tb.size() >= 2)) cases.push_back(3);
  if (cases.empty()) return std::nullopt;
  const int chosen = cases[rng.below(cases.size())];

  Draft d;
  int64_t s1, s2, t1, t2;
  switch (chosen) {
    case 0:
    case 1: {
      auto pick = sample_distinct(both, 2, rng);
      s1 = pick[0];
      s2 = pick[1];
      t1 = chosen == 0 ? s1 : s2;
      t2 = chosen == 0 ? s2 : s1;
      break;
    }
    case 2: {
      s1 = both[rng.below(both.size())];
      std::vector<int64_t> sa;
      for (int64_t t : ta)
        if (t != s1) sa.push_back(t);
      if (sa.empty()) return std::nullopt;
      s2 = sa[rng.below(sa.size())];
      std::vector<int64_t> fillers;
      for (int64_t t : tb)
        if (t != s1 && t != s2) fillers.push_back(t);
      if (fillers.empty()) return std::nullopt;
      const int64_t w = fillers[rng.below(fillers.size())];
      if (rng.below(2)) {
        t1 = s1;
        t2 = w;
      } else {
        t1 = w;
        t2 = s1;
      }
      break;
    }
    default: {
      auto sa = sample_distinct(ta, 2, rng);
      s1 = sa[0];
      s2 = sa[1];
      std::vector<int64_t> fillers;
      for (int64_t t : tb)
        if (t != s1 && t != s2) fillers.push_back(t);
      if (fillers.size() < 2) return std::nullopt;
      auto pick = sample_distinct(fillers, 2, rng);
      t1 = pick[0];
      t2 = pick[1];
      break;
    }
  }
  d.refs = {c.ref(c.va, s1), c.ref(c.va, s2), c.ref(c.vb, t1), c.ref(c.vb, t2)};
  d.gold = chosen;
  d.gold_class = options[chosen];
  return d;
}

std::optional<Draft> attempt_q5(const PairCtx& c, Rng& rng) {
  std::vector<int64_t> both;
  for (int64_t t : c.tracks(c.va))
    if (c.in_view(c.vb, t)) both.push_back(t);
  std::vector<std::pair<int64_t, int64_t>> mismatches;
  for (int64_t t : c.tracks(c.va))
    for (int64_t u : c.tracks(c.vb))
      if (u != t) mismatches.emplace_back(t, u);
  const bool can_yes = !both.empty();
  const bool can_no = !mismatches.empty();
  if (!can_yes && !can_no) return std::nullopt;
  const bool yes = can_yes && (!can_no || rng.below(2) == 0);
  Draft d;
  if (yes) {
    const int64_t t = both[rng.below(both.size())];
    d.refs = {c.ref(c.va, t), c.ref(c.vb, t)};
    d.gold_class = "yes";
  } else {
    const auto [t, u] = mismatches[rng.below(mismatches.size())];
    d.refs = {c.ref(c.va, t), c.ref(c.vb, u)};
    d.gold_class = "no";
  }
  return d;
}

std::optional<Draft> attempt_q6(const PairCtx& c, Rng& rng) {
  std::vector<int64_t> yes, no;
  for (int64_t t : c.tracks(c.va))
    (c.in_view(c.vb, t) ? yes : no).push_back(t);
  if (yes.empty() && no.empty()) return std::nullopt;
  const bool pick_yes = !yes.empty() && (no.empty() || rng.below(2) == 0);
  Draft d;
  const auto& pool = pick_yes ? yes : no;
  d.refs = {c.ref(c.va, pool[rng.below(pool.size())])};
  d.gold_class = pick_yes ? "yes" : "no";
  return d;
}

std::optional<Draft> attempt_q7(const PairCtx& c, Rng& rng) {
  std::vector<int64_t> common, exclusive;
  for (int64_t t : c.tracks(c.va))
    (c.in_view(c.vb, t) ? common : exclusive).push_back(t);
  if (common.size() < 3 || exclusive.empty()) return std::nullopt;
  auto shared = sample_distinct(common, 3, rng);
  const int64_t missing = exclusive[rng.below(exclusive.size())];
  std::vector<int64_t> candidates = shared;
  candidates.push_back(missing);
  shuffle_vec(candidates, rng);
  Draft d;
  for (int64_t t : candidates) d.refs.push_back(c.ref(c.va, t));
  for (size_t i = 0; i < candidates.size(); ++i)
    if (candidates[i] == missing) d.gold = static_cast<int>(i);
  return d;
}

std::optional<Draft> attempt_q8(const PairCtx& c, Rng& rng) {
  const auto ta = c.tracks(c.va);
  std::vector<std::pair<int64_t, int64_t>> fixtures;  // (occluded, gold occluder)
  for (int64_t t : ta) {
    const auto& p = c.proj(c.va, t);
    auto g = gold_occluder(p);
    if (!g || !c.in_view(c.va, *g)) continue;
    std::set<int64_t> excluded{t, *g};
    for (const auto& oc : p.occluders) excluded.insert(oc.track_id);
    int distractors = 0;
    for (int64_t u : ta) distractors += excluded.count(u) ? 0 : 1;
    if (distractors >= 3) fixtures.emplace_back(t, *g);
  }
  if (fixtures.empty()) return std::nullopt;
  const auto [target, gold] = fixtures[rng.below(fixtures.size())];
  const auto& p = c.proj(c.va, target);
  std::set<int64_t> excluded{target, gold};
  for (const auto& oc : p.occluders) excluded.insert(oc.track_id);
  std::vector<int64_t> pool;
  for (int64_t u : ta)
    if (!excluded.count(u)) pool.push_back(u);
  auto distractors = sample_distinct(pool, 3, rng);
  std::vector<int64_t> candidates{gold};
  candidates.insert(candidates.end(), distractors.begin(), distractors.end());
  shuffle_vec(candidates, rng);
  Draft d;
  d.refs.push_back(c.ref(c.va, target));
  for (int64_t t : candidates) d.refs.push_back(c.ref(c.va, t));
  for (size_t i = 0; i < candidates.size(); ++i)
    if (candidates[i] == gold) d.gold = static_cast<int>(i) ;
  return d;
}

std::optional<Draft> attempt_q9(const PairCtx& c, Rng& rng) {
  const auto tb = c.tracks(c.vb);
  std::vector<std::pair<int64_t, int64_t>> fixtures;  // (target, nn)
  for (int64_t t : c.tracks(c.va)) {
    auto nn = c.rel.nearest_of(c.va, t);
    if (!nn || !c.in_view(c.vb, *nn)) continue;
    int others = 0;
    for (int64_t u : tb) others += (u != *nn) ? 1 : 0;
    if (others >= 3) fixtures.emplace_back(t, *nn);
  }
  if (fixtures.empty()) return std::nullopt;
  const auto [target, nn] = fixtures[rng.below(fixtures.size())];
  std::vector<int64_t> pool;
  for (int64_t u : tb)
    if (u != nn) pool.push_back(u);
  auto distractors = sample_distinct(pool, 3, rng);
  std::vector<int64_t> candidates{nn};
  candidates.insert(candidates.end(), distractors.begin(), distractors.end());
  shuffle_vec(candidates, rng);
  Draft d;
  d.refs.push_back(c.ref(c.va, target));
  for (int64_t t : candidates) d.refs.push_back(c.ref(c.vb, t));
  for (size_t i = 0; i < candidates.size(); ++i)
    if (candidates[i] == nn) d.gold = static_cast<int>(i);
  return d;
}

std::optional<Draft> attempt_q10(const PairCtx& c, Rng& rng) {
  const auto& options = task_specs()[9].options;
  std::vector<std::vector<int64_t>> by_class(4);
  for (int64_t t : c.tracks(c.va)) {
    if (!c.in_view(c.vb, t)) {
      by_class[3].push_back(t);
      continue;
    }
    auto ratio = c.rel.scale_ratio(c.va, c.vb, t);
    if (!ratio) continue;
    if (*ratio >= kScaleLarger)
      by_class[0].push_back(t);
    else if (*ratio <= kScaleSmaller)
      by_class[1].push_back(t);
    else if (*ratio >= kSimilarLo && *ratio <= kSimilarHi)
      by_class[2].push_back(t);
  }
  std::vector<int> available;
  for (int k = 0; k < 4; ++k)
    if (!by_class[k].empty()) available.push_back(k);
  if (available.empty()) return std::nullopt;
  const int cls = available[rng.below(available.size())];
  const auto& pool = by_class[cls];
  Draft d;
  d.refs = {c.ref(c.va, pool[rng.below(pool.size())])};
  d.gold = cls;
  d.gold_class = options[cls];
  return d;
}

std::optional<Draft> attempt_q11(const PairCtx& c, Rng& rng) {
  const auto ta = c.tracks(c.va);
  std::vector<std::pair<int64_t, int64_t>> pairs;
  for (size_t i = 0; i < ta.size(); ++i)
    for (size_t j = i + 1; j < ta.size(); ++j) {
      const double vi = c.proj(c.va, ta[i]).visible_fraction;
      const double vj = c.proj(c.va, ta[j]).visible_fraction;
      if (std::fabs(vi - vj) >= kVfMargin) pairs.emplace_back(ta[i], ta[j]);
    }
  if (pairs.empty()) return std::nullopt;
  auto [x, y] = pairs[rng.below(pairs.size())];
  if (rng.below(2)) std::swap(x, y);
  Draft d;
  d.refs = {c.ref(c.va, x), c.ref(c.va, y)};
  const bool first = c.proj(c.va, x).visible_fraction > c.proj(c.va, y).visible_fraction;
  d.gold = first ? 0 : 1;
  d.gold_class = kRegion2[d.gold];
  return d;
}

std::optional<Draft> attempt_q12(const PairCtx& c, Rng& rng) {
  std::vector<int64_t> eligible;
  for (int64_t t : c.tracks(c.va)) {
    if (!c.in_view(c.vb, t)) continue;
    const double va_f = c.proj(c.va, t).visible_fraction;
    const double vb_f = c.proj(c.vb, t).visible_fraction;
    if (std::fabs(va_f - vb_f) >= kVfMargin) eligible.push_back(t);
  }
  if (eligible.empty()) return std::nullopt;
  const int64_t t = eligible[rng.below(eligible.size())];
  Draft d;
  d.refs = {c.ref(c.va, t), c.ref(c.vb, t)};
  const bool a_more = c.proj(c.va, t).visible_fraction > c.proj(c.vb, t).visible_fraction;
  d.gold_class = a_more ? "view a" : "view b";
  return d;
}

std::optional<Draft> attempt_q13(const PairCtx& c, Rng& rng) {
  std::vector<std::tuple<int64_t, int64_t, bool>> pairs;
  const auto ta = c.tracks(c.va);
  for (size_t i = 0; i < ta.size(); ++i)
    for (size_t j = i + 1; j < ta.size(); ++j) {
      if (!c.in_view(c.vb, ta[i]) || !c.in_view(c.vb, ta[j])) continue;
      auto flip = c.rel.lr_flipped(c.va, c.vb, ta[i], ta[j]);
      if (flip) pairs.emplace_back(ta[i], ta[j], *flip);
    }
  if (pairs.empty()) return std::nullopt;
  std::vector<size_t> flips, keeps;
  for (size_t k = 0; k < pairs.size(); ++k)
    (std::get<2>(pairs[k]) ? flips : keeps).push_back(k);
  const bool want_flip = !flips.empty() && (keeps.empty() || rng.below(2) == 0);
  const auto& pool = want_flip ? flips : keeps;
  auto [x, y, flip] = pairs[pool[rng.below(pool.size())]];
  if (rng.below(2)) std::swap(x, y);
  Draft d;
  d.refs = {c.ref(c.va, x), c.ref(c.va, y), c.ref(c.vb, x), c.ref(c.vb, y)};
  d.gold_class = flip ? "yes" : "no";
  return d;
}

std::optional<Draft> attempt_q14(const PairCtx& c, Rng& rng) {
  const auto ta = c.tracks(c.va);
  std::vector<std::pair<int64_t, int64_t>> pairs;
  for (size_t i = 0; i < ta.size(); ++i)
    for (size_t j = i + 1; j < ta.size(); ++j) {
      auto di = c.rel.displacement_px(c.va, c.vb, ta[i]);
      auto dj = c.rel.displacement_px(c.va, c.vb, ta[j]);
      if (di && dj && std::fabs(*di - *dj) >= kDispMarginPx) pairs.emplace_back(ta[i], ta[j]);
    }
  if (pairs.empty()) return std::nullopt;
  auto [x, y] = pairs[rng.below(pairs.size())];
  if (rng.below(2)) std::swap(x, y);
  Draft d;
  d.refs = {c.ref(c.va, x), c.ref(c.va, y)};
  const bool first = *c.rel.displacement_px(c.va, c.vb, x) > *c.rel.displacement_px(c.va, c.vb, y);
  d.gold = first ? 0 : 1;
  d.gold_class = kRegion2[d.gold];
  return d;
}

std::optional<Draft> attempt_q15(const PairCtx& c, Rng& rng) {
  struct Fixture {
    int64_t nearer, farther;
    bool same;
  };
  std::vector<Fixture> yes, no;
  const auto ta = c.tracks(c.va);
  for (size_t i = 0; i < ta.size(); ++i)
    for (size_t j = 0; j < ta.size(); ++j) {
      if (i == j) continue;
      const int64_t x = ta[i], y = ta[j];
      if (!c.in_view(c.vb, x) || !c.in_view(c.vb, y)) continue;
      const double da_x = c.proj(c.va, x).mean_depth, da_y = c.proj(c.va, y).mean_depth;
      const double db_x = c.proj(c.vb, x).mean_depth, db_y = c.proj(c.vb, y).mean_depth;
      if (da_x + kDepthMargin > da_y || std::fabs(db_x - db_y) < kDepthMargin) continue;
      const bool same = db_x < db_y;
      (same ? yes : no).push_back({x, y, same});
    }
  if (yes.empty() && no.empty()) return std::nullopt;
  const bool want_yes = !yes.empty() && (no.empty() || rng.below(2) == 0);
  const auto& pool = want_yes ? yes : no;
  const auto f = pool[rng.below(pool.size())];
  Draft d;
  d.refs = {c.ref(c.va, f.nearer), c.ref(c.va, f.farther), c.ref(c.vb, f.nearer),
            c.ref(c.vb, f.farther)};
  d.gold_class = f.same ? "yes" : "no";
  return d;
}

std::optional<Draft> attempt_q16(const PairCtx& c, Rng& rng) {
  const auto ta = c.tracks(c.va);
  std::vector<std::pair<int64_t, int64_t>> pairs;
  for (size_t i = 0; i < ta.size(); ++i)
    for (size_t j = i + 1; j < ta.size(); ++j) {
      auto gi = c.rel.scale_ratio(c.va, c.vb, ta[i]);
      auto gj = c.rel.scale_ratio(c.va, c.vb, ta[j]);
      if (!gi || !gj) continue;
      if (*gi >= *gj * kGrowthRatio || *gj >= *gi * kGrowthRatio) pairs.emplace_back(ta[i], ta[j]);
    }
  if (pairs.empty()) return std::nullopt;
  auto [x, y] = pairs[rng.below(pairs.size())];
  if (rng.below(2)) std::swap(x, y);
  Draft d;
  d.refs = {c.ref(c.va, x), c.ref(c.va, y)};
  const bool first = *c.rel.scale_ratio(c.va, c.vb, x) > *c.rel.scale_ratio(c.va, c.vb, y);
  d.gold = first ? 0 : 1;
  d.gold_class = kRegion2[d.gold];
  return d;
}

std::optional<Draft> attempt_q17(const PairCtx& c, Rng& rng) {
  std::vector<std::pair<int64_t, int64_t>> contact, apart;
  for (const auto& [view, x, y] : c.sc.overlap_pairs) {
    if (view != c.va) continue;
    if (!c.in_view(c.va, x) || !c.in_view(c.va, y)) continue;
    (c.sc.in_contact(x, y) ? contact : apart).emplace_back(x, y);
  }
  if (contact.empty() && apart.empty()) return std::nullopt;
  const bool want_contact = !contact.empty() && (apart.empty() || rng.below(2) == 0);
  const auto& pool = want_contact ? contact : apart;
  auto [x, y] = pool[rng.below(pool.size())];
  if (rng.below(2)) std::swap(x, y);
  Draft d;
  d.refs = {c.ref(c.va, x), c.ref(c.va, y)};
  d.gold_class = want_contact ? "yes" : "no";
  return d;
}

std::optional<Draft> attempt(const PairCtx& c, int task_id, Rng& rng) {
  switch (task_id) {
    case 1: return attempt_q1(c, rng, 4);
    case 2: return attempt_q1(c, rng, 2);
    case 3: return attempt_q3(c, rng);
    case 4: return attempt_q4(c, rng);
    case 5: return attempt_q5(c, rng);
    case 6: return attempt_q6(c, rng);
    case 7: return attempt_q7(c, rng);
    case 8: return attempt_q8(c, rng);
    case 9: return attempt_q9(c, rng);
    case 10: return attempt_q10(c, rng);
    case 11: return attempt_q11(c, rng);
    case 12: return attempt_q12(c, rng);
    case 13: return attempt_q13(c, rng);
    case 14: return attempt_q14(c, rng);
    case 15: return attempt_q15(c, rng);
    case 16: return attempt_q16(c, rng);
    case 17: return attempt_q17(c, rng);
    default: throw ConfigError("unknown task id " + std::to_string(task_id));
  }
}

}  // namespace

std::vector<QASample> instantiate_qa(const scene::Scene& sc, const scene::RelationRecords& rel,
                                     int task_id, Rng& rng, int per_pair_cap) {
  const TaskSpec& spec = task_specs()[task_id - 1];
  std::vector<QASample> out;
  int counter = 0;
  const int nviews = static_cast<int>(sc.views.size());
  for (int va = 0; va < nviews; ++va)
    for (int vb = va + 1; vb < nviews; ++vb) {
      PairCtx ctx{sc, rel, va, vb};
      std::set<std::string> seen;
      int emitted = 0;
      for (int tries = 0; tries < per_pair_cap * 3 && emitted < per_pair_cap; ++tries) {
        auto draft = attempt(ctx, task_id, rng);
        if (!draft) break;

        QASample s;
        s.task_id = task_id;
        s.scene_id = sc.scene_id;
        s.view_a = va;
        s.view_b = vb;
        s.region_refs = draft->refs;
        s.question = spec.templates[rng.below(spec.templates.size())];
        s.options = spec.options;
        if (spec.shuffle_options) {
          shuffle_vec(s.options, rng);
          s.gold = find_option(s.options, draft->gold_class);
        } else {
          s.gold = draft->gold;
        }
        s.gold_class = draft->gold_class.empty() ? spec.options[draft->gold] : draft->gold_class;

        // fixture identity: class plus the set of referenced regions
        std::vector<std::pair<int, int>> sorted_refs;
        for (const auto& r : s.region_refs) sorted_refs.emplace_back(r.view_id, r.object_index);
        std::sort(sorted_refs.begin(), sorted_refs.end());
        std::ostringstream key;
        key << s.gold_class;
        for (const auto& [v, o] : sorted_refs) key << ":" << v << "." << o;
        if (!seen.insert(key.str()).second) continue;

        std::ostringstream sid;
        sid << "s" << sc.scene_id << "-q" << task_id << "-" << counter++;
        s.sample_id = sid.str();
        out.push_back(std::move(s));
        emitted++;
      }
    }
  return out;
}

std::vector<QASample> instantiate_qa(const scene::Scene& sc, int task_id, Rng& rng,
                                     int per_pair_cap) {
  const auto rel = scene::geometric_relations(sc);
  return instantiate_qa(sc, rel, task_id, rng, per_pair_cap);
}

namespace {

int64_t ref_track(const QASample& s, const scene::Scene& sc, int i) {
  const auto& r = s.region_refs[i];
  return sc.projections[r.view_id][r.object_index].track_id;
}

}  // namespace

std::optional<int> derive_gold(const QASample& s, const scene::Scene& sc,
                               const scene::RelationRecords& rel) {
  const auto& options = s.options;
  auto by_class = [&](const std::string& text) -> std::optional<int> {
    const int i = find_option(options, text);
    if (i < 0) return std::nullopt;
    return i;
  };

  switch (s.task_id) {
    case 1:
    case 2: {
      const int64_t target = ref_track(s, sc, 0);
      for (size_t i = 1; i < s.region_refs.size(); ++i)
        if (ref_track(s, sc, static_cast<int>(i)) == target) return static_cast<int>(i) - 1;
      return std::nullopt;
    }
    case 3: {
      const int64_t target = ref_track(s, sc, 0);
      for (int i = 1; i <= 3; ++i)
        if (ref_track(s, sc, i) == target) return i - 1;
      return 3;
    }
    case 4: {
      const int64_t s1 = ref_track(s, sc, 0), s2 = ref_track(s, sc, 1);
      const int64_t t1 = ref_track(s, sc, 2), t2 = ref_track(s, sc, 3);
      const bool m11 = s1 == t1, m12 = s1 == t2, m21 = s2 == t1, m22 = s2 == t2;
      const int count = m11 + m12 + m21 + m22;
      if (m11 && m22) return 0;
      if (m12 && m21) return 1;
      if (count == 1) return 2;
      if (count == 0) return 3;
      return std::nullopt;
    }
    case 5:
      return by_class(ref_track(s, sc, 0) == ref_track(s, sc, 1) ? "yes" : "no");
    case 6:
      return by_class(sc.find_projection(s.view_b, ref_track(s, sc, 0)) >= 0 ? "yes" : "no");
    case 7: {
      int missing = -1;
      for (int i = 0; i < 4; ++i) {
        if (sc.find_projection(s.view_b, ref_track(s, sc, i)) < 0) {
          if (missing >= 0) return std::nullopt;
          missing = i;
        }
      }
      if (missing < 0) return std::nullopt;
      return missing;
    }
    case 8: {
      const auto& target = sc.projections[s.region_refs[0].view_id][s.region_refs[0].object_index];
      auto g = gold_occluder(target);
      if (!g) return std::nullopt;
      for (int i = 1; i <= 4; ++i)
        if (ref_track(s, sc, i) == *g) return i - 1;
      return std::nullopt;
    }
    case 9: {
      auto nn = rel.nearest_of(s.view_a, ref_track(s, sc, 0));
      if (!nn) return std::nullopt;
      for (int i = 1; i <= 4; ++i)
        if (ref_track(s, sc, i) == *nn) return i - 1;
      return std::nullopt;
    }
    case 10: {
      const int64_t t = ref_track(s, sc, 0);
      if (sc.find_projection(s.view_b, t) < 0) return 3;
      auto ratio = rel.scale_ratio(s.view_a, s.view_b, t);
      if (!ratio) return std::nullopt;
      if (*ratio >= kScaleLarger) return 0;
      if (*ratio <= kScaleSmaller) return 1;
      if (*ratio >= kSimilarLo && *ratio <= kSimilarHi) return 2;
      return std::nullopt;
    }
    case 11: {
      const auto& p0 = sc.projections[s.region_refs[0].view_id][s.region_refs[0].object_index];
      const auto& p1 = sc.projections[s.region_refs[1].view_id][s.region_refs[1].object_index];
      if (p0.visible_fraction == p1.visible_fraction) return std::nullopt;
      return p0.visible_fraction > p1.visible_fraction ? 0 : 1;
    }
    case 12: {
      const int64_t t = ref_track(s, sc, 0);
      const int ia = sc.find_projection(s.view_a, t), ib = sc.find_projection(s.view_b, t);
      if (ia < 0 || ib < 0) return std::nullopt;
      const double fa = sc.projections[s.view_a][ia].visible_fraction;
      const double fb = sc.projections[s.view_b][ib].visible_fraction;
      if (fa == fb) return std::nullopt;
      return by_class(fa > fb ? "view a" : "view b");
    }
    case 13: {
      auto flip = rel.lr_flipped(s.view_a, s.view_b, ref_track(s, sc, 0), ref_track(s, sc, 1));
      if (!flip) return std::nullopt;
      return by_class(*flip ? "yes" : "no");
    }
    case 14: {
      auto d0 = rel.displacement_px(s.view_a, s.view_b, ref_track(s, sc, 0));
      auto d1 = rel.displacement_px(s.view_a, s.view_b, ref_track(s, sc, 1));
      if (!d0 || !d1 || *d0 == *d1) return std::nullopt;
      return *d0 > *d1 ? 0 : 1;
    }
    case 15: {
      const int64_t n = ref_track(s, sc, 0), f = ref_track(s, sc, 1);
      auto in_a = rel.nearer_than(s.view_a, n, f);
      auto in_b = rel.nearer_than(s.view_b, n, f);
      if (!in_a || !*in_a || !in_b) return std::nullopt;  // question presumes n nearer in view a
      return by_class(*in_b ? "yes" : "no");
    }
    case 16: {
      auto g0 = rel.scale_ratio(s.view_a, s.view_b, ref_track(s, sc, 0));
      auto g1 = rel.scale_ratio(s.view_a, s.view_b, ref_track(s, sc, 1));
      if (!g0 || !g1 || *g0 == *g1) return std::nullopt;
      return *g0 > *g1 ? 0 : 1;
    }
    case 17: {
      const int64_t x = ref_track(s, sc, 0), y = ref_track(s, sc, 1);
      const int view = s.region_refs[0].view_id;
      if (!sc.visually_overlapping(view, x, y)) return std::nullopt;
      return by_class(sc.in_contact(x, y) ? "yes" : "no");
    }
    default:
      return std::nullopt;
  }
}

std::vector<std::string> validate_sample(const QASample& s, const scene::Scene& sc,
                                         const scene::RelationRecords& rel) {
  std::vector<std::string> violations;

  size_t placeholders = 0;
  size_t cursor = 0;
  while ((cursor = s.question.find("<region>", cursor)) != std::string::npos) {
    placeholders++;
    cursor += 8;
  }
  if (placeholders != s.region_refs.size()) violations.push_back("placeholder-count");
  if (s.options.size() != 2 && s.options.size() != 4) violations.push_back("option-count");
  if (s.gold < 0 || s.gold >= static_cast<int>(s.options.size()))
    violations.push_back("gold-range");
  if (s.task_id < 1 || s.task_id > 17) {
    violations.push_back("task-range");
    return violations;
  }

  bool refs_ok = true;
  for (const auto& r : s.region_refs) {
    if (r.view_id < 0 || r.view_id >= static_cast<int>(sc.projections.size()) ||
        r.object_index < 0 ||
        r.object_index >= static_cast<int>(sc.projections[r.view_id].size()) ||
        sc.projections[r.view_id][r.object_index].mask.count() == 0) {
      violations.push_back("dangling-ref");
      refs_ok = false;
      break;
    }
  }
  if (refs_ok && violations.empty()) {
    auto expected = derive_gold(s, sc, rel);
    if (!expected || *expected != s.gold) violations.push_back("gold-mismatch");
  }
  return violations;
}

std::vector<std::string> validate_sample(const QASample& s, const scene::Scene& sc) {
  return validate_sample(s, sc, scene::geometric_relations(sc));
}

std::vector<QASample> balance_gold_classes(std::vector<QASample> samples, Rng& rng) {
  std::map<int, std::map<std::string, std::vector<size_t>>> groups;
  for (size_t i = 0; i < samples.size(); ++i)
    groups[samples[i].task_id][samples[i].gold_class].push_back(i);

  std::vector<uint8_t> keep(samples.size(), 0);
  for (auto& [task, classes] : groups) {
    size_t min_count = SIZE_MAX;
    for (auto& [cls, idx] : classes) min_count = std::min(min_count, idx.size());
    for (auto& [cls, idx] : classes) {
      auto chosen = sample_distinct(idx, min_count, rng);
      for (size_t i : chosen) keep[i] = 1;
    }
  }
  std::vector<QASample> out;
  for (size_t i = 0; i < samples.size(); ++i)
    if (keep[i]) out.push_back(std::move(samples[i]));
  std::sort(out.begin(), out.end(),
            [](const QASample& a, const QASample& b) { return a.sample_id < b.sample_id; });
  return out;
}

const SplitManifest::Split* SplitManifest::find(const std::string& name) const {
  for (const auto& s : splits)
    if (s.name == name) return &s;
  return nullptr;
}

bool SplitManifest::contains(const std::string& name, int64_t scene_id) const {
  const Split* s = find(name);
  if (!s) return false;
  return std::binary_search(s->scene_ids.begin(), s->scene_ids.end(), scene_id);
}

std::string SplitManifest::serialize() const {
  std::ostringstream os;
  for (const auto& s : splits) {
    os << "split " << s.name << " " << scene::format_double(s.ratio) << "\n";
    for (int64_t id : s.scene_ids) os << "scene " << id << "\n";
  }
  return os.str();
}

SplitManifest SplitManifest::parse(const std::string& text) {
  SplitManifest m;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "split") {
      Split s;
      ls >> s.name >> s.ratio;
      m.splits.push_back(std::move(s));
    } else if (kind == "scene") {
      if (m.splits.empty()) throw IoError("split manifest: scene before split");
      int64_t id;
      ls >> id;
      m.splits.back().scene_ids.push_back(id);
    } else if (!kind.empty()) {
      throw IoError("split manifest: unknown record '" + kind + "'");
    }
  }
  return m;
}

SplitManifest build_split(const std::vector<int64_t>& scene_ids,
                          const std::vector<std::pair<std::string, double>>& ratios,
                          uint64_t seed) {
  double total = 0;
  for (const auto& [name, r] : ratios) total += r;
  if (std::fabs(total - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
  if (scene_ids.size() < ratios.size())
    throw ConfigError("fewer scenes than splits");

  std::vector<int64_t> ids = scene_ids;
  std::sort(ids.begin(), ids.end());
  Rng rng(mix_seed(seed, 0x5b1177ull));
  shuffle_vec(ids, rng);

  SplitManifest m;
  std::vector<size_t> counts;
  size_t assigned = 0;
  for (const auto& [name, r] : ratios) {
    counts.push_back(static_cast<size_t>(r * ids.size()));
    assigned += counts.back();
  }
  for (size_t i = 0; assigned < ids.size(); i = (i + 1) % counts.size()) {
    counts[i]++;
    assigned++;
  }
  size_t cursor = 0;
  for (size_t k = 0; k < ratios.size(); ++k) {
    SplitManifest::Split s;
    s.name = ratios[k].first;
    s.ratio = ratios[k].second;
    s.scene_ids.assign(ids.begin() + cursor, ids.begin() + cursor + counts[k]);
    std::sort(s.scene_ids.begin(), s.scene_ids.end());
    cursor += counts[k];
    m.splits.push_back(std::move(s));
  }
  return m;
}

void save_corpus(const std::string& path, const std::vector<CorpusRecord>& records) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write corpus " + path);
  for (const auto& rec : records) {
    nlohmann::json j;
    j["sample_id"] = rec.sample.sample_id;
    j["task"] = rec.sample.task_id;
    j["question"] = rec.sample.question;
    auto refs = nlohmann::json::array();
    for (const auto& r : rec.sample.region_refs)
      refs.push_back(nlohmann::json::array({r.view_id, r.object_index}));
    j["region_refs"] = refs;
    j["options"] = rec.sample.options;
    j["gold"] = rec.sample.gold;
    j["scene"] = rec.sample.scene_id;
    j["view_a"] = rec.sample.view_a;
    j["view_b"] = rec.sample.view_b;
    j["bundle"] = rec.bundle_path;
    os << j.dump() << "\n";
  }
}

std::vector<CorpusRecord> load_corpus(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read corpus " + path);
  std::vector<CorpusRecord> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    CorpusRecord rec;
    rec.sample.sample_id = j.at("sample_id").get<std::string>();
    rec.sample.task_id = j.at("task").get<int>();
    rec.sample.question = j.at("question").get<std::string>();
    for (const auto& r : j.at("region_refs"))
      rec.sample.region_refs.push_back({r.at(0).get<int>(), r.at(1).get<int>()});
    rec.sample.options = j.at("options").get<std::vector<std::string>>();
    rec.sample.gold = j.at("gold").get<int>();
    rec.sample.scene_id = j.at("scene").get<int64_t>();
    rec.sample.view_a = j.at("view_a").get<int>();
    rec.sample.view_b = j.at("view_b").get<int>();
    rec.bundle_path = j.at("bundle").get<std::string>();
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace xview::qa
