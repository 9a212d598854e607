#include "hns/rl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace hns::rl {

std::vector<Chunk> make_chunks(const Window& w, const PPOConfig& cfg) {
  int T = (int)w.steps.size();
  if (T == 0) throw std::invalid_argument("make_chunks: empty window");
  int n = (T + cfg.chunk_len - 1) / cfg.chunk_len;  // final chunk may be short
  if ((int)w.pi_states.size() != n || (int)w.vf_states.size() != n)
    throw std::invalid_argument("make_chunks: missing chunk-start states");

  std::vector<float> r(T), v(T);
  std::vector<uint8_t> d(T);
  for (int t = 0; t < T; ++t) {
    r[t] = w.steps[t].reward;
    v[t] = w.steps[t].value;
    d[t] = w.steps[t].done;
  }
  GaeOut g = gae_targets(r, v, d, w.v_boot, cfg.gamma, cfg.lam);

  std::vector<Chunk> out(n);
  for (int k = 0; k < n; ++k) {
    Chunk& c = out[k];
    int t0 = k * cfg.chunk_len;
    int t1 = std::min(T, t0 + cfg.chunk_len);
    c.steps.assign(w.steps.begin() + t0, w.steps.begin() + t1);
    c.pi_state0 = w.pi_states[k];
    c.vf_state0 = w.vf_states[k];
    c.adv.assign(g.adv.begin() + t0, g.adv.begin() + t1);
    c.ret.assign(g.ret.begin() + t0, g.ret.begin() + t1);
  }
  return out;
}

void ChunkBuffer::push(Chunk&& c) {
  chunks_.push_back(std::move(c));
  ++inserted_;
  while (chunks_.size() > capacity_) {
    chunks_.pop_front();
    ++evicted_;
  }
}

void ChunkBuffer::evict_if(const std::function<bool(const Chunk&)>& pred) {
  std::deque<Chunk> kept;
  for (auto& c : chunks_) {
    if (pred(c))
      ++evicted_;
    else
      kept.push_back(std::move(c));
  }
  chunks_ = std::move(kept);
}

Tape::Ref chunk_loss(Tape& t, const policy::AgentNets& nets, const Chunk& c,
                     const ObsNormalizer& obs_norm,
                     const NormalizerState& vtarg_norm, float adv_mean,
                     float adv_std, const PPOConfig& cfg,
                     ChunkLossStats* stats) {
  int n = (int)c.steps.size();
  if (n == 0 || (int)c.adv.size() != n || (int)c.ret.size() != n)
    throw std::invalid_argument("chunk_loss: malformed chunk");
  float inv_std = 1.0f / (adv_std < 1e-8f ? 1e-8f : adv_std);

  Tape::Ref pi_hc = t.input(c.pi_state0);
  Tape::Ref vf_hc = t.input(c.vf_state0);
  std::vector<Tape::Ref> losses;
  losses.reserve(n);
  ChunkLossStats acc;
  for (int s = 0; s < n; ++s) {
    if (s > 0 && c.steps[s - 1].done) {
      // episode boundary inside the chunk: recurrent state restarts
      pi_hc = t.input(nets.pi.initial_state());
      vf_hc = t.input(nets.vf.initial_state());
    }
    policy::ForwardRefs fpi =
        nets.pi.forward(t, obs_norm.apply(c.steps[s].pi_obs), pi_hc);
    policy::ForwardRefs fvf =
        nets.vf.forward(t, obs_norm.apply(c.steps[s].vf_obs), vf_hc);
    pi_hc = fpi.hc;
    vf_hc = fvf.hc;

    policy::ActionStatsRefs st = policy::action_stats(t, fpi, c.steps[s].act);
    float a = (c.adv[s] - adv_mean) * inv_std;
    Tape::Ref ratio = t.exp_(t.add_scalar(st.logp, -c.steps[s].logp_old));
    Tape::Ref surr_raw = t.scale(ratio, a);
    Tape::Ref surr_clip =
        t.scale(t.clamp(ratio, 1.0f - cfg.clip, 1.0f + cfg.clip), a);
    // ties go to the unclipped branch so its gradient flows at equality
    Tape::Ref surr = t.min_pair(surr_raw, surr_clip);

    float vt = vtarg_norm.norm(0, c.ret[s]);
    Tape::Ref verr = t.square(t.add_scalar(fvf.value, -vt));

    losses.push_back(t.add_n({t.scale(surr, -1.0f),
                              t.scale(verr, cfg.value_coeff),
                              t.scale(st.entropy, -cfg.ent_coeff)}));

    acc.policy_term += -surr->v->d[0];
    acc.value_term += verr->v->d[0];
    acc.entropy += st.entropy->v->d[0];
    if (std::abs(ratio->v->d[0] - 1.0f) > cfg.clip) acc.clip_count += 1;
  }
  acc.policy_term /= n;
  acc.value_term /= n;
  acc.entropy /= n;
  acc.steps = n;
  if (stats) *stats = acc;
  return t.scale(t.add_n(losses), 1.0f / (float)n);
}

namespace {

struct GroupResult {
  GradSink sink;
  std::vector<std::pair<int, ChunkLossStats>> stats;  // minibatch position
  double loss = 0;
};

void run_group(const ParamStore& ps, const policy::AgentNets& nets,
               ChunkBuffer& buffer, const std::vector<size_t>& picks,
               const ObsNormalizer& obs_norm,
               const NormalizerState& vtarg_norm, float adv_mean,
               float adv_std, const PPOConfig& cfg, int group,
               GroupResult& out) {
  float seed = 1.0f / (float)picks.size();
  for (int p = group; p < (int)picks.size(); p += cfg.grad_groups) {
    const Chunk& c = buffer.at(picks[p]);
    Tape t(&ps, &out.sink, true);
    ChunkLossStats st;
    Tape::Ref loss =
        chunk_loss(t, nets, c, obs_norm, vtarg_norm, adv_mean, adv_std, cfg,
                   &st);
    t.backward(loss, seed);
    out.stats.emplace_back(p, st);
    out.loss += loss->v->d[0] * seed;
  }
}

}  // namespace

OptimStats optimize_step(ParamStore& ps, const policy::AgentNets& nets,
                         ChunkBuffer& buffer, ObsNormalizer& obs_norm,
                         NormalizerState& vtarg_norm, const PPOConfig& cfg,
                         Rng& rng) {
  OptimStats out;
  out.buffer_size = buffer.size();
  out.evicted_total = buffer.evicted();
  if ((int)buffer.size() < cfg.minibatch) return out;

  // buffer-wide advantage moments; chunks keep raw advantages
  double sum = 0, sq = 0;
  int64_t count = 0;
  for (size_t i = 0; i < buffer.size(); ++i)
    for (float a : buffer.at(i).adv) {
      sum += a;
      sq += (double)a * a;
      ++count;
    }
  float adv_mean = (float)(sum / (double)count);
  double var = sq / (double)count - (sum / (double)count) * (sum / (double)count);
  float adv_std = (float)std::sqrt(var < 0 ? 0 : var);

  std::vector<uint8_t> touched(buffer.size(), 0);
  std::vector<size_t> order(buffer.size());
  double total_steps = 0;
  double clip_total = 0;
  for (int sub = 0; sub < cfg.substeps; ++sub) {
    // minibatch drawn without replacement within the substep
    std::iota(order.begin(), order.end(), (size_t)0);
    std::vector<size_t> picks(cfg.minibatch);
    for (int j = 0; j < cfg.minibatch; ++j) {
      size_t k = (size_t)j + (size_t)rng.randint((int)(order.size() - j));
      std::swap(order[j], order[k]);
      picks[j] = order[j];
      touched[picks[j]] = 1;
    }

    // normalizer statistics advance once per substep, before the losses
    std::vector<const env::Observation*> obs_batch;
    std::vector<float> ret_batch;
    for (size_t idx : picks) {
      const Chunk& c = buffer.at(idx);
      for (const StepSample& s : c.steps) obs_batch.push_back(&s.pi_obs);
      ret_batch.insert(ret_batch.end(), c.ret.begin(), c.ret.end());
    }
    obs_norm.update_batch(obs_batch);
    vtarg_norm.update_batch(ret_batch.data(), ret_batch.size());

    // fixed gradient groups keyed by minibatch position; merge order is the
    // group index, so the reduction is thread-count invariant
    int groups = std::min(cfg.grad_groups, cfg.minibatch);
    std::vector<GroupResult> results(groups);
    auto work = [&](int g) {
      run_group(ps, nets, buffer, picks, obs_norm, vtarg_norm, adv_mean,
                adv_std, cfg, g, results[g]);
    };
    if (cfg.threads <= 1) {
      for (int g = 0; g < groups; ++g) work(g);
    } else {
      std::vector<std::thread> pool;
      for (int tid = 0; tid < cfg.threads; ++tid)
        pool.emplace_back([&, tid] {
          for (int g = tid; g < groups; g += cfg.threads) work(g);
        });
      for (auto& th : pool) th.join();
    }

    ps.zero_grads();
    for (int g = 0; g < groups; ++g) results[g].sink.add_into(ps);
    out.grad_norm += ps.grad_norm();
    ps.adam_step(cfg.adam);

    for (int g = 0; g < groups; ++g) {
      out.loss += results[g].loss;
      for (const auto& [p, st] : results[g].stats) {
        (void)p;
        out.policy_loss += st.policy_term;
        out.value_loss += st.value_term;
        out.entropy += st.entropy;
        clip_total += st.clip_count;
        total_steps += st.steps;
      }
    }
    ++out.substeps_run;
  }

  double nb = (double)cfg.substeps * cfg.minibatch;
  out.policy_loss /= nb;
  out.value_loss /= nb;
  out.entropy /= nb;
  out.loss /= cfg.substeps;
  out.grad_norm /= cfg.substeps;
  out.clip_fraction = total_steps > 0 ? clip_total / total_steps : 0;

  // reuse ages at step granularity: drawn at least once this step costs one
  for (size_t i = 0; i < buffer.size(); ++i) {
    if (!touched[i]) continue;
    Chunk& c = buffer.at(i);
    ++c.reuse;
    if (c.reuse > cfg.max_reuse)
      throw std::logic_error("optimize_step: chunk reuse exceeded cap");
  }
  buffer.evict_if(
      [&](const Chunk& c) { return c.reuse >= cfg.max_reuse; });

  out.buffer_size = buffer.size();
  out.evicted_total = buffer.evicted();
  out.ran = true;
  return out;
}

}  // namespace hns::rl
