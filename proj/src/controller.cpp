#include "nis/controller.hpp"

#include <algorithm>
#include <cmath>

#include "nis/errors.hpp"

namespace nis {

bool FinalChoice::removed() const {
  if (!me_mode) return se.is_sentinel();
  for (int s : me.rows_per_col)
    if (s > 0) return false;
  return true;
}

std::vector<double> softmax(const std::vector<double>& logits) {
  std::vector<double> p(logits.size());
  double mx = logits[0];
  for (double x : logits) mx = std::max(mx, x);
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (double& x : p) x /= z;
  return p;
}

namespace {

int draw_categorical(const std::vector<double>& probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;  // guard against rounding
}

double log_softmax_at(const std::vector<double>& logits, int idx) {
  double mx = logits[0];
  for (double x : logits) mx = std::max(mx, x);
  double z = 0.0;
  for (double x : logits) z += std::exp(x - mx);
  return logits[static_cast<std::size_t>(idx)] - mx - std::log(z);
}

}  // namespace

Controller::Controller(std::vector<FeatureSpace> spaces, ParamStore& policy_store,
                       ParamStore& baseline_store, Rng& init_rng, double entropy_bonus)
    : spaces_(std::move(spaces)), entropy_bonus_(entropy_bonus) {
  for (std::size_t f = 0; f < spaces_.size(); ++f) {
    const auto& sp = spaces_[f];
    if (sp.S < 1 || sp.T < 1) throw ConfigError("controller feature space needs S, T >= 1");
    for (int slot = 0; slot < sp.slots(); ++slot) {
      // Near-zero random init so the initial policy is approximately uniform.
      policy_store.create_uniform(policy_param(static_cast<int>(f), slot), {sp.actions()}, 0.01,
                                  init_rng);
      baseline_store.create(baseline_param(static_cast<int>(f), slot), {1});
      ++total_slots_;
    }
  }
}

std::string Controller::policy_param(int feature, int slot) const {
  return "ctrl." + spaces_[static_cast<std::size_t>(feature)].feature + "." + std::to_string(slot);
}

std::string Controller::baseline_param(int feature, int slot) const {
  return "base." + spaces_[static_cast<std::size_t>(feature)].feature + "." + std::to_string(slot);
}

SeChoice Controller::decode_se_action(int action, int T) {
  if (action == 0) return SeChoice{0, 0};
  const int idx = action - 1;
  return SeChoice{idx / T + 1, idx % T + 1};
}

int Controller::encode_se_action(const SeChoice& choice, int T) {
  if (choice.is_sentinel()) return 0;
  return 1 + (choice.s - 1) * T + (choice.t - 1);
}

std::pair<SeChoice, double> Controller::sample_se(const ParamStore& policy_store, int feature,
                                                  Rng& rng) const {
  const auto& sp = spaces_[static_cast<std::size_t>(feature)];
  if (sp.me_mode) throw ContractViolation("sample_se on an ME-mode feature");
  const std::vector<double>& logits = policy_store.get(policy_param(feature, 0)).v;
  const auto probs = softmax(logits);
  const int action = draw_categorical(probs, rng);
  return {decode_se_action(action, sp.T), log_softmax_at(logits, action)};
}

std::pair<MeChoice, double> Controller::sample_me(const ParamStore& policy_store, int feature,
                                                  Rng& rng) const {
  const auto& sp = spaces_[static_cast<std::size_t>(feature)];
  if (!sp.me_mode) throw ContractViolation("sample_me on an SE-mode feature");
  MeChoice choice;
  double lp = 0.0;
  for (int slot = 0; slot < sp.T; ++slot) {
    const std::vector<double>& logits = policy_store.get(policy_param(feature, slot)).v;
    const auto probs = softmax(logits);
    const int action = draw_categorical(probs, rng);
    choice.rows_per_col.push_back(action);
    lp += log_softmax_at(logits, action);
  }
  return {choice, lp};
}

ChoiceRecord Controller::sample_all(const ParamStore& policy_store,
                                    const ParamStore& baseline_store, Rng& rng) const {
  ChoiceRecord rec;
  rec.actions.resize(spaces_.size());
  for (std::size_t f = 0; f < spaces_.size(); ++f) {
    const auto& sp = spaces_[f];
    for (int slot = 0; slot < sp.slots(); ++slot) {
      const std::vector<double>& logits = policy_store.get(policy_param(static_cast<int>(f), slot)).v;
      const auto probs = softmax(logits);
      const int action = draw_categorical(probs, rng);
      rec.actions[f].push_back(action);
      rec.log_prob += log_softmax_at(logits, action);
    }
  }
  rec.baseline_pred = baseline_prediction(baseline_store);
  return rec;
}

SeChoice Controller::se_of(const ChoiceRecord& rec, int feature) const {
  const auto& sp = spaces_[static_cast<std::size_t>(feature)];
  if (sp.me_mode) throw ContractViolation("se_of on an ME-mode feature");
  return decode_se_action(rec.actions[static_cast<std::size_t>(feature)][0], sp.T);
}

MeChoice Controller::me_of(const ChoiceRecord& rec, int feature) const {
  const auto& sp = spaces_[static_cast<std::size_t>(feature)];
  if (!sp.me_mode) throw ContractViolation("me_of on an SE-mode feature");
  MeChoice c;
  c.rows_per_col.assign(rec.actions[static_cast<std::size_t>(feature)].begin(),
                        rec.actions[static_cast<std::size_t>(feature)].end());
  return c;
}

double Controller::baseline_prediction(const ParamStore& baseline_store) const {
  double acc = 0.0;
  for (std::size_t f = 0; f < spaces_.size(); ++f)
    for (int slot = 0; slot < spaces_[f].slots(); ++slot)
      acc += baseline_store.get(baseline_param(static_cast<int>(f), slot)).v[0];
  return acc / static_cast<double>(total_slots_);
}

UpdateResult Controller::update(ParamStore& policy_store, ParamStore& baseline_store,
                                const std::vector<ChoiceRecord>& records, double lr_policy,
                                double lr_baseline) const {
  if (records.empty()) throw ContractViolation("controller update with no records");
  for (const auto& rec : records)
    if (!std::isfinite(rec.reward))
      return {false, "non-finite reward in controller batch; step rejected"};

  const double inv_r = 1.0 / static_cast<double>(records.size());
  GradMap policy_grads;
  GradMap baseline_grads;
  for (std::size_t f = 0; f < spaces_.size(); ++f) {
    const auto& sp = spaces_[f];
    for (int slot = 0; slot < sp.slots(); ++slot) {
      const std::string pname = policy_param(static_cast<int>(f), slot);
      const std::vector<double>& logits = policy_store.get(pname).v;
      const auto probs = softmax(logits);
      Tensor g({static_cast<std::int64_t>(logits.size())});
      for (const auto& rec : records) {
        const double adv = rec.reward - rec.baseline_pred;
        const int action = rec.actions[f][static_cast<std::size_t>(slot)];
        // d/dlogits of -adv * log pi(action): adv * (p - onehot).
        for (std::size_t i = 0; i < probs.size(); ++i) g.v[i] += inv_r * adv * probs[i];
        g.v[static_cast<std::size_t>(action)] -= inv_r * adv;
      }
      if (entropy_bonus_ > 0.0) {
        double ent = 0.0;
        for (double p : probs)
          if (p > 0.0) ent -= p * std::log(p);
        for (std::size_t i = 0; i < probs.size(); ++i)
          g.v[i] += entropy_bonus_ * probs[i] * (std::log(std::max(probs[i], 1e-300)) + ent);
      }
      policy_grads.emplace(pname, std::move(g));

      // Squared-error regression of the mean-of-slots prediction.
      const std::string bname = baseline_param(static_cast<int>(f), slot);
      Tensor bg({1});
      for (const auto& rec : records)
        bg.v[0] += inv_r * 2.0 * (rec.baseline_pred - rec.reward) / static_cast<double>(total_slots_);
      baseline_grads.emplace(bname, std::move(bg));
    }
  }
  policy_store.apply_gradients(policy_grads, lr_policy);
  baseline_store.apply_gradients(baseline_grads, lr_baseline);
  return {true, ""};
}

std::vector<FinalChoice> Controller::derive_final_architecture(
    const ParamStore& policy_store, const std::vector<const BlockGrid*>& grids) const {
  if (grids.size() != spaces_.size())
    throw ContractViolation("derive_final_architecture: grid count mismatch");
  std::vector<FinalChoice> out;
  for (std::size_t f = 0; f < spaces_.size(); ++f) {
    const auto& sp = spaces_[f];
    FinalChoice fc;
    fc.me_mode = sp.me_mode;
    if (!sp.me_mode) {
      const std::vector<double>& logits = policy_store.get(policy_param(static_cast<int>(f), 0)).v;
      int best = 0;
      for (int a = 1; a < sp.actions(); ++a) {
        const double la = logits[static_cast<std::size_t>(a)];
        const double lb = logits[static_cast<std::size_t>(best)];
        if (la > lb) {
          best = a;
        } else if (la == lb) {
          const auto ca = grids[f]->se_cost(decode_se_action(a, sp.T));
          const auto cb = grids[f]->se_cost(decode_se_action(best, sp.T));
          if (ca < cb) best = a;  // equal costs keep the lower index
        }
      }
      fc.se = decode_se_action(best, sp.T);
    } else {
      for (int slot = 0; slot < sp.T; ++slot) {
        const std::vector<double>& logits =
            policy_store.get(policy_param(static_cast<int>(f), slot)).v;
        int best = 0;  // per-column cost grows with the action, so ties keep the lower index
        for (int a = 1; a <= sp.S; ++a)
          if (logits[static_cast<std::size_t>(a)] > logits[static_cast<std::size_t>(best)]) best = a;
        fc.me.rows_per_col.push_back(best);
      }
    }
    out.push_back(std::move(fc));
  }
  return out;
}

}  // namespace nis
