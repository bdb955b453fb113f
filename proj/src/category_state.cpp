#include "efl/category_state.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace efl {

namespace {

constexpr const char* kMagic = "EFLSTATE";
constexpr int kVersion = 1;

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

}  // namespace

void CategoryState::refresh() {
  const int c = num_categories();
  for (int j = 0; j < c; ++j) {
    if (pos_acc[j] == 0.0 && neg_acc[j] == 0.0) {
      g[j] = 1.0;  // no statistics yet, behave as plain focal loss
    } else {
      g[j] = clamp01(pos_acc[j] / std::max(neg_acc[j], eps));
    }
    gamma_v[j] = s * (1.0 - g[j]);
    gamma[j] = gamma_b + gamma_v[j];
    weight[j] = gamma[j] / gamma_b;
  }
}

void CategoryState::update(const std::vector<double>& pos_mag,
                           const std::vector<double>& neg_mag) {
  const size_t c = pos_acc.size();
  if (pos_mag.size() != c || neg_mag.size() != c)
    throw std::invalid_argument("update: magnitude size mismatch");
  for (size_t j = 0; j < c; ++j)
    if (!(pos_mag[j] >= 0.0) || !(neg_mag[j] >= 0.0))
      throw std::invalid_argument("update: magnitudes must be >= 0");
  for (size_t j = 0; j < c; ++j) {
    if (ema_decay > 0.0) {
      pos_acc[j] = ema_decay * pos_acc[j] + (1.0 - ema_decay) * pos_mag[j];
      neg_acc[j] = ema_decay * neg_acc[j] + (1.0 - ema_decay) * neg_mag[j];
    } else {
      pos_acc[j] += pos_mag[j];
      neg_acc[j] += neg_mag[j];
    }
  }
  refresh();
}

CategoryState init_state(int c, const LossHyperParams& hp, double eps,
                         double ema_decay) {
  if (c < 1) throw std::invalid_argument("init_state: need >= 1 category");
  hp.validate();
  CategoryState st;
  st.gamma_b = hp.gamma_b;
  st.s = hp.s;
  st.eps = eps;
  st.ema_decay = ema_decay;
  st.pos_acc.assign(c, 0.0);
  st.neg_acc.assign(c, 0.0);
  st.g.assign(c, 1.0);
  st.gamma_v.assign(c, 0.0);
  st.gamma.assign(c, hp.gamma_b);
  st.weight.assign(c, 1.0);
  st.refresh();
  return st;
}

void gather_stats(const std::vector<double>& grads,
                  const std::vector<BinaryTarget>& targets, int n, int c,
                  std::vector<double>& pos_mag, std::vector<double>& neg_mag) {
  if (grads.size() != static_cast<size_t>(n) * static_cast<size_t>(c) ||
      targets.size() != grads.size())
    throw std::invalid_argument("gather_stats: shape mismatch");
  pos_mag.assign(c, 0.0);
  neg_mag.assign(c, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < c; ++j) {
      const size_t k = static_cast<size_t>(i) * c + j;
      const double m = std::fabs(grads[k]);
      if (targets[k].y == 1)
        pos_mag[j] += m;
      else
        neg_mag[j] += m;
    }
  }
}

std::string serialize(const CategoryState& state) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s v%d C=%d gamma_b=%a s=%a eps=%a ema=%a\n",
                kMagic, kVersion, state.num_categories(), state.gamma_b,
                state.s, state.eps, state.ema_decay);
  out << buf;
  for (int j = 0; j < state.num_categories(); ++j) {
    std::snprintf(buf, sizeof(buf), "%d %a %a\n", j, state.pos_acc[j],
                  state.neg_acc[j]);
    out << buf;
  }
  return out.str();
}

CategoryState deserialize_state(const std::string& text) {
  std::istringstream in(text);
  int c = -1;
  CategoryState st;
  std::string header;
  if (!std::getline(in, header))
    throw std::runtime_error("state checkpoint: empty input (line 1)");
  {
    char mg[32] = {0};
    int version = -1;
    if (std::sscanf(header.c_str(),
                    "%31s v%d C=%d gamma_b=%la s=%la eps=%la ema=%la", mg,
                    &version, &c, &st.gamma_b, &st.s, &st.eps,
                    &st.ema_decay) != 7 ||
        std::string(mg) != kMagic)
      throw std::runtime_error("state checkpoint: bad header (line 1)");
    if (version != kVersion)
      throw std::runtime_error("state checkpoint: unsupported version (line 1)");
  }
  if (c < 1) throw std::runtime_error("state checkpoint: bad category count");
  st.pos_acc.assign(c, 0.0);
  st.neg_acc.assign(c, 0.0);
  st.g.assign(c, 1.0);
  st.gamma_v.assign(c, 0.0);
  st.gamma.assign(c, st.gamma_b);
  st.weight.assign(c, 1.0);
  std::string line;
  for (int j = 0; j < c; ++j) {
    if (!std::getline(in, line))
      throw std::runtime_error("state checkpoint: truncated at record " +
                               std::to_string(j) + " (line " +
                               std::to_string(j + 2) + ")");
    int idx = -1;
    double p = 0.0, ng = 0.0;
    if (std::sscanf(line.c_str(), "%d %la %la", &idx, &p, &ng) != 3 ||
        idx != j || !(p >= 0.0) || !(ng >= 0.0))
      throw std::runtime_error("state checkpoint: bad record (line " +
                               std::to_string(j + 2) + ")");
    st.pos_acc[j] = p;
    st.neg_acc[j] = ng;
  }
  st.refresh();
  return st;
}

void save_state(const CategoryState& state, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << serialize(state);
}

CategoryState load_state(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open state checkpoint: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize_state(ss.str());
}

}  // namespace efl
