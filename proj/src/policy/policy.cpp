#include "hns/policy/policy.hpp"

#include <cmath>
#include <stdexcept>

namespace hns::policy {

namespace {

const char* kClassNames[env::kEntityClasses] = {"agent", "box",      "ramp",
                                                "pellet", "cylinder", "site"};

void softmax5(const float* logits, float* p) {
  float mx = logits[0];
  for (int i = 1; i < kMoveBins; ++i) mx = std::max(mx, logits[i]);
  float z = 0;
  for (int i = 0; i < kMoveBins; ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (int i = 0; i < kMoveBins; ++i) p[i] /= z;
}

float cat_entropy(const std::array<float, kMoveBins>& p) {
  float h = 0;
  for (float x : p)
    if (x > 0) h -= x * std::log(x);
  return h;
}

float safe_log(float p) { return std::log(std::max(p, 1e-12f)); }

int sample_bins(const std::array<float, kMoveBins>& p, Rng& rng) {
  double u = rng.uniform();
  double c = 0;
  for (int i = 0; i < kMoveBins; ++i) {
    c += p[i];
    if (u < c) return i;
  }
  return kMoveBins - 1;
}

}  // namespace

Net::Net(const PolicyConfig& cfg, std::string prefix, bool action_heads,
         bool value_head, int feature_dim)
    : cfg_(cfg),
      pfx_(std::move(prefix)),
      action_heads_(action_heads),
      value_head_(value_head),
      feature_dim_(feature_dim) {
  if (cfg_.embed % cfg_.heads != 0)
    throw std::invalid_argument("policy: heads must divide embed width");
  if (feature_dim_ > 0 && (action_heads_ || value_head_))
    throw std::invalid_argument("policy: feature nets carry no other heads");
}

void Net::init_params(ParamStore& ps, Rng& rng) const {
  int c = cfg_.lidar_channels, e = cfg_.embed, m = cfg_.mlp, h = cfg_.lstm;
  int x = cfg_.x_self_dim();
  ps.create(key("conv.k"), c, cfg_.lidar_kernel, Init::xavier, rng, true);
  ps.create(key("conv.b"), 1, c, Init::zeros, rng);
  for (const char* cls : kClassNames) {
    std::string base = key(std::string("embed.") + cls);
    ps.create(base + ".w", x + cfg_.entity_dim, e, Init::xavier, rng, true);
    ps.create(base + ".b", 1, e, Init::zeros, rng);
    ps.create(base + ".ln_g", 1, e, Init::ones, rng);
    ps.create(base + ".ln_b", 1, e, Init::zeros, rng);
  }
  if (cfg_.use_attention) {
    ps.create(key("att.wq"), e, e, Init::xavier, rng, true);
    ps.create(key("att.wk"), e, e, Init::xavier, rng, true);
    ps.create(key("att.wv"), e, e, Init::xavier, rng, true);
    ps.create(key("att.proj.w"), e, e, Init::xavier, rng, true);
    ps.create(key("att.proj.b"), 1, e, Init::zeros, rng);
    ps.create(key("att.ln_g"), 1, e, Init::ones, rng);
    ps.create(key("att.ln_b"), 1, e, Init::zeros, rng);
  }
  ps.create(key("trunk.w"), x + e, m, Init::xavier, rng, true);
  ps.create(key("trunk.b"), 1, m, Init::zeros, rng);
  ps.create(key("trunk.ln_g"), 1, m, Init::ones, rng);
  ps.create(key("trunk.ln_b"), 1, m, Init::zeros, rng);
  if (feature_dim_ > 0) {
    ps.create(key("head.feat.w"), m, feature_dim_, Init::xavier, rng, true);
    ps.create(key("head.feat.b"), 1, feature_dim_, Init::zeros, rng);
    return;  // stateless feature net, no recurrence
  }
  ps.create(key("lstm.wx"), m, 4 * h, Init::xavier, rng, true);
  ps.create(key("lstm.wh"), h, 4 * h, Init::xavier, rng, true);
  Tensor& lb = ps.create(key("lstm.b"), 1, 4 * h, Init::zeros, rng);
  for (int j = h; j < 2 * h; ++j) lb.d[j] = 1.0f;  // open forget gates
  if (action_heads_) {
    const char* heads[kCatHeads] = {"move_x", "move_y", "torque"};
    for (const char* name : heads) {
      ps.create(key(std::string("head.") + name + ".w"), h, kMoveBins,
                Init::xavier, rng, true);
      ps.create(key(std::string("head.") + name + ".b"), 1, kMoveBins,
                Init::zeros, rng);
    }
    for (const char* name : {"grab", "lock"}) {
      ps.create(key(std::string("head.") + name + ".w"), h, 1, Init::xavier,
                rng, true);
      ps.create(key(std::string("head.") + name + ".b"), 1, 1, Init::zeros, rng);
    }
  }
  if (value_head_) {
    ps.create(key("head.value.w"), h, 1, Init::xavier, rng, true);
    ps.create(key("head.value.b"), 1, 1, Init::zeros, rng);
  }
}

Tensor Net::initial_state() const { return Tensor(1, 2 * cfg_.lstm); }

std::vector<std::string> Net::transfer_reinit_names() const {
  return {key("trunk.w"), key("trunk.b"), key("trunk.ln_g"), key("trunk.ln_b")};
}

ForwardRefs Net::forward(Tape& t, const env::Observation& obs,
                         Tape::Ref hc) const {
  if ((int)obs.self.size() != cfg_.self_dim ||
      (int)obs.lidar.size() != cfg_.lidar_rays)
    throw std::invalid_argument("policy forward: observation shape");

  Tensor self_t(1, cfg_.self_dim);
  self_t.d.assign(obs.self.begin(), obs.self.end());
  Tensor lidar_t(1, cfg_.lidar_rays);
  lidar_t.d.assign(obs.lidar.begin(), obs.lidar.end());

  Tape::Ref conv = t.circular_conv1d(t.input(lidar_t), t.param(key("conv.k")),
                                     t.param(key("conv.b")), cfg_.lidar_kernel);
  Tape::Ref xs = t.concat_cols(t.input(self_t), t.reshape_row(conv));

  std::vector<Tape::Ref> embs;
  std::vector<uint8_t> mask;
  for (int c = 0; c < env::kEntityClasses; ++c) {
    const env::EntityBlock& blk = obs.entities[c];
    if (blk.count == 0) continue;
    if ((int)blk.feats.size() != blk.count * cfg_.entity_dim)
      throw std::invalid_argument("policy forward: entity block shape");
    Tensor feats(blk.count, cfg_.entity_dim);
    feats.d.assign(blk.feats.begin(), blk.feats.end());
    Tape::Ref rows = t.concat_broadcast_row(xs, t.input(feats));
    std::string base = key(std::string("embed.") + kClassNames[c]);
    Tape::Ref emb = t.relu(
        t.layernorm(t.linear(rows, t.param(base + ".w"), t.param(base + ".b")),
                    t.param(base + ".ln_g"), t.param(base + ".ln_b")));
    embs.push_back(emb);
    mask.insert(mask.end(), blk.visible.begin(), blk.visible.end());
  }

  Tape::Ref pool;
  if (embs.empty()) {
    pool = t.input(Tensor(1, cfg_.embed));  // nothing to pool
  } else {
    Tape::Ref ents = embs.size() == 1 ? embs[0] : t.concat_rows(embs);
    if (cfg_.use_attention) {
      Tape::Ref att =
          t.attention(ents, t.param(key("att.wq")), t.param(key("att.wk")),
                      t.param(key("att.wv")), mask, cfg_.heads);
      Tape::Ref res = t.add(
          t.linear(att, t.param(key("att.proj.w")), t.param(key("att.proj.b"))),
          ents);
      ents = t.layernorm(res, t.param(key("att.ln_g")), t.param(key("att.ln_b")));
    }
    pool = t.masked_mean_rows(ents, mask);
  }

  Tape::Ref joint = t.concat_cols(xs, pool);
  Tape::Ref trunk = t.relu(t.layernorm(
      t.linear(joint, t.param(key("trunk.w")), t.param(key("trunk.b"))),
      t.param(key("trunk.ln_g")), t.param(key("trunk.ln_b"))));
  if (feature_dim_ > 0) {
    ForwardRefs out;
    out.h = trunk;
    out.features = t.linear(trunk, t.param(key("head.feat.w")),
                            t.param(key("head.feat.b")));
    return out;
  }
  Tape::Ref hc2 = t.lstm_step(trunk, hc, t.param(key("lstm.wx")),
                              t.param(key("lstm.wh")), t.param(key("lstm.b")));

  ForwardRefs out;
  out.hc = hc2;
  out.h = t.slice_cols(hc2, 0, cfg_.lstm);
  if (action_heads_) {
    const char* heads[kCatHeads] = {"move_x", "move_y", "torque"};
    for (int k = 0; k < kCatHeads; ++k)
      out.cat_logits[k] =
          t.linear(out.h, t.param(key(std::string("head.") + heads[k] + ".w")),
                   t.param(key(std::string("head.") + heads[k] + ".b")));
    out.grab_logit = t.linear(out.h, t.param(key("head.grab.w")),
                              t.param(key("head.grab.b")));
    out.lock_logit = t.linear(out.h, t.param(key("head.lock.w")),
                              t.param(key("head.lock.b")));
  }
  if (value_head_)
    out.value = t.linear(out.h, t.param(key("head.value.w")),
                         t.param(key("head.value.b")));
  return out;
}

ActionDistribution extract_distribution(const ForwardRefs& f) {
  ActionDistribution d;
  for (int k = 0; k < kCatHeads; ++k)
    softmax5(f.cat_logits[k]->v->d.data(), d.cat[k].data());
  d.bern[0] = 1.0f / (1.0f + std::exp(-f.grab_logit->v->d[0]));
  d.bern[1] = 1.0f / (1.0f + std::exp(-f.lock_logit->v->d[0]));
  return d;
}

SampledAction sample_actions(const ActionDistribution& d, Rng& rng) {
  SampledAction s;
  int* bins[kCatHeads] = {&s.act.move_x, &s.act.move_y, &s.act.torque};
  for (int k = 0; k < kCatHeads; ++k) {
    int b = sample_bins(d.cat[k], rng);
    *bins[k] = b;
    s.logp += safe_log(d.cat[k][b]);
    s.entropy += cat_entropy(d.cat[k]);
  }
  bool* flags[2] = {&s.act.grab, &s.act.lock};
  for (int k = 0; k < 2; ++k) {
    bool on = rng.chance(d.bern[k]);
    *flags[k] = on;
    float p = on ? d.bern[k] : 1.0f - d.bern[k];
    s.logp += safe_log(p);
    float q = d.bern[k];
    if (q > 0 && q < 1)
      s.entropy -= q * std::log(q) + (1 - q) * std::log(1 - q);
  }
  return s;
}

float action_log_prob(const ActionDistribution& d, const ActionTriple& a) {
  float lp = safe_log(d.cat[0][a.move_x]) + safe_log(d.cat[1][a.move_y]) +
             safe_log(d.cat[2][a.torque]);
  lp += safe_log(a.grab ? d.bern[0] : 1.0f - d.bern[0]);
  lp += safe_log(a.lock ? d.bern[1] : 1.0f - d.bern[1]);
  return lp;
}

ActionStatsRefs action_stats(Tape& t, const ForwardRefs& f,
                             const ActionTriple& a) {
  int bins[kCatHeads] = {a.move_x, a.move_y, a.torque};
  std::vector<Tape::Ref> lps, ents;
  for (int k = 0; k < kCatHeads; ++k) {
    Tape::Ref ls = t.logsoftmax_rows(f.cat_logits[k]);
    lps.push_back(t.pick(ls, 0, bins[k]));
    ents.push_back(t.scale(t.sum_all(t.mul(t.exp_(ls), ls)), -1.0f));
  }
  Tape::Ref flags[2] = {f.grab_logit, f.lock_logit};
  bool bits[2] = {a.grab, a.lock};
  for (int k = 0; k < 2; ++k) {
    Tape::Ref bs = t.bernoulli_stats(flags[k], bits[k] ? 1 : 0);
    lps.push_back(t.slice_cols(bs, 0, 1));
    ents.push_back(t.slice_cols(bs, 1, 2));
  }
  return {t.add_n(lps), t.add_n(ents)};
}

void reinit_for_transfer(ParamStore& ps, const AgentNets& nets, Rng& rng) {
  for (const Net* net : {&nets.pi, &nets.vf}) {
    for (const std::string& name : net->transfer_reinit_names()) {
      if (!ps.has(name))
        throw std::invalid_argument("reinit_for_transfer: missing " + name);
      ParamEntry& e = ps.entry(name);
      if (name.ends_with(".w")) {
        double limit = std::sqrt(6.0 / (e.value.rows + e.value.cols));
        for (float& x : e.value.d) x = (float)rng.uniform(-limit, limit);
      } else if (name.ends_with(".ln_g")) {
        e.value.fill(1.0f);
      } else {
        e.value.fill(0.0f);
      }
      e.m.fill(0.0f);
      e.v.fill(0.0f);
    }
  }
}

void freeze_prefix(ParamStore& ps, const std::string& prefix) {
  for (auto& [name, entry] : ps)
    if (name.rfind(prefix, 0) == 0) entry.trainable = false;
}

void attach_counting_head(ParamStore& ps, const PolicyConfig& cfg, Rng& rng) {
  int h = cfg.lstm;
  ps.create("ct.ln_g", 1, h, Init::ones, rng);
  ps.create("ct.ln_b", 1, h, Init::zeros, rng);
  ps.create("ct.fc1.w", h, kCountingHidden, Init::xavier, rng, true);
  ps.create("ct.fc1.b", 1, kCountingHidden, Init::zeros, rng);
  ps.create("ct.fc2.w", kCountingHidden, kCountingClasses, Init::xavier, rng,
            true);
  ps.create("ct.fc2.b", 1, kCountingClasses, Init::zeros, rng);
}

Tape::Ref counting_forward(Tape& t, Tape::Ref lstm_h) {
  Tape::Ref x = t.layernorm(t.detach(lstm_h), t.param("ct.ln_g"),
                            t.param("ct.ln_b"));
  Tape::Ref hidden = t.relu(t.linear(x, t.param("ct.fc1.w"), t.param("ct.fc1.b")));
  return t.linear(hidden, t.param("ct.fc2.w"), t.param("ct.fc2.b"));
}

}  // namespace hns::policy
