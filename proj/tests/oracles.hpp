#pragma once
// Independent reference implementations used by the tests. Written for
// clarity with plain loops over std::vector; nothing here calls library ops.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;

inline Vec random_vec(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

inline Vec binary_vec(std::size_t n, std::mt19937_64& rng, double p = 0.5) {
  std::bernoulli_distribution b(p);
  Vec v(n);
  for (auto& x : v) x = b(rng) ? 1.0 : 0.0;
  return v;
}

inline double max_abs_diff(const Vec& a, const Vec& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return a.size() == b.size() ? m : std::numeric_limits<double>::infinity();
}

// ---- tensor ops --------------------------------------------------------------

inline Vec matmul(const Vec& a, const Vec& b, int m, int k, int p) {
  Vec c(static_cast<std::size_t>(m * p), 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < p; ++j) {
      double s = 0;
      for (int t = 0; t < k; ++t) s += a[i * k + t] * b[t * p + j];
      c[i * p + j] = s;
    }
  return c;
}

// Cross-correlation, x [ci,h,w], w [co,ci,k,k].
inline Vec conv2d(const Vec& x, const Vec& w, const Vec& bias, int ci, int h, int wd, int co, int k, int stride,
                  int pad, int& oh, int& ow) {
  oh = (h + 2 * pad - k) / stride + 1;
  ow = (wd + 2 * pad - k) / stride + 1;
  Vec y(static_cast<std::size_t>(co * oh * ow));
  for (int o = 0; o < co; ++o)
    for (int r = 0; r < oh; ++r)
      for (int c = 0; c < ow; ++c) {
        double s = bias.empty() ? 0.0 : bias[o];
        for (int i = 0; i < ci; ++i)
          for (int u = 0; u < k; ++u)
            for (int v = 0; v < k; ++v) {
              const int yy = r * stride - pad + u, xx = c * stride - pad + v;
              if (yy < 0 || yy >= h || xx < 0 || xx >= wd) continue;
              s += w[((o * ci + i) * k + u) * k + v] * x[(i * h + yy) * wd + xx];
            }
        y[(o * oh + r) * ow + c] = s;
      }
  return y;
}

inline Vec avgpool(const Vec& x, int c, int h, int w, int k, int stride, int pad, int& oh, int& ow) {
  oh = (h + 2 * pad - k) / stride + 1;
  ow = (w + 2 * pad - k) / stride + 1;
  Vec y(static_cast<std::size_t>(c * oh * ow));
  for (int ch = 0; ch < c; ++ch)
    for (int r = 0; r < oh; ++r)
      for (int col = 0; col < ow; ++col) {
        double s = 0;
        for (int u = 0; u < k; ++u)
          for (int v = 0; v < k; ++v) {
            const int yy = r * stride - pad + u, xx = col * stride - pad + v;
            if (yy >= 0 && yy < h && xx >= 0 && xx < w) s += x[(ch * h + yy) * w + xx];
          }
        y[(ch * oh + r) * ow + col] = s / (k * k);
      }
  return y;
}

// Grouped per-pixel filtering: y[c,h,w] = sum_{u,v} f[g(c),h,w,u,v] x[c,h+u-K/2,w+v-K/2].
inline Vec grouped_dynamic_filter(const Vec& x, const Vec& f, int c, int h, int w, int g, int k) {
  Vec y(static_cast<std::size_t>(c * h * w), 0.0);
  const int cg = c / g;
  for (int ch = 0; ch < c; ++ch)
    for (int r = 0; r < h; ++r)
      for (int col = 0; col < w; ++col) {
        double s = 0;
        const int grp = ch / cg;
        for (int u = 0; u < k; ++u)
          for (int v = 0; v < k; ++v) {
            const int yy = r + u - k / 2, xx = col + v - k / 2;
            if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
            s += f[(((grp * h + r) * w + col) * k + u) * k + v] * x[(ch * h + yy) * w + xx];
          }
        y[(ch * h + r) * w + col] = s;
      }
  return y;
}

// Half-pixel bilinear sampling: source coordinate (i + 0.5) * in / out - 0.5, clamped at 0.
inline Vec resize_bilinear(const Vec& x, int c, int h, int w, int oh, int ow) {
  Vec y(static_cast<std::size_t>(c * oh * ow));
  auto coord = [](int i, int in, int out, int& lo, int& hi, double& frac) {
    double s = (i + 0.5) * in / out - 0.5;
    if (s < 0) s = 0;
    lo = static_cast<int>(std::floor(s));
    if (lo > in - 1) lo = in - 1;
    hi = std::min(lo + 1, in - 1);
    frac = s - lo;
  };
  for (int ch = 0; ch < c; ++ch)
    for (int r = 0; r < oh; ++r)
      for (int col = 0; col < ow; ++col) {
        int y0, y1, x0, x1;
        double fy, fx;
        coord(r, h, oh, y0, y1, fy);
        coord(col, w, ow, x0, x1, fx);
        auto at = [&](int yy, int xx) { return x[(ch * h + yy) * w + xx]; };
        y[(ch * oh + r) * ow + col] = (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) +
                                      fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1));
      }
  return y;
}

// ---- attention -----------------------------------------------------------------

// Multi-head attention with explicit loops. wq/wk/wv [d, heads*dk], wo [heads*dk, d].
inline Vec attention(const Vec& q, const Vec& k, const Vec& v, const Vec& wq, const Vec& wk, const Vec& wv,
                     const Vec& wo, int n, int d, int heads, int dk) {
  const int inner = heads * dk;
  auto project = [&](const Vec& t, const Vec& w) {
    Vec out(static_cast<std::size_t>(n * inner), 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < inner; ++j)
        for (int t2 = 0; t2 < d; ++t2) out[i * inner + j] += t[i * d + t2] * w[t2 * inner + j];
    return out;
  };
  const Vec qp = project(q, wq), kp = project(k, wk), vp = project(v, wv);
  Vec joined(static_cast<std::size_t>(n * inner), 0.0);
  for (int h = 0; h < heads; ++h) {
    for (int i = 0; i < n; ++i) {
      std::vector<double> score(static_cast<std::size_t>(n));
      double mx = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < n; ++j) {
        double s = 0;
        for (int t = 0; t < dk; ++t) s += qp[i * inner + h * dk + t] * kp[j * inner + h * dk + t];
        score[j] = s / std::sqrt(static_cast<double>(dk));
        mx = std::max(mx, score[j]);
      }
      double z = 0;
      for (auto& s : score) z += (s = std::exp(s - mx));
      for (int t = 0; t < dk; ++t) {
        double acc = 0;
        for (int j = 0; j < n; ++j) acc += score[j] / z * vp[j * inner + h * dk + t];
        joined[i * inner + h * dk + t] = acc;
      }
    }
  }
  Vec out(static_cast<std::size_t>(n * d), 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      for (int t = 0; t < inner; ++t) out[i * d + j] += joined[i * inner + t] * wo[t * d + j];
  return out;
}

// ---- morphology ----------------------------------------------------------------

inline Vec dilate(const Vec& m, int h, int w, int k) {
  Vec out(m.size(), 0.0);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      bool any = false;
      for (int u = -k / 2; u <= k / 2; ++u)
        for (int v = -k / 2; v <= k / 2; ++v) {
          const int yy = r + u, xx = c + v;
          if (yy >= 0 && yy < h && xx >= 0 && xx < w && m[yy * w + xx] > 0.5) any = true;
        }
      out[r * w + c] = any ? 1.0 : 0.0;
    }
  return out;
}

inline Vec erode(const Vec& m, int h, int w, int k) {
  Vec out(m.size(), 0.0);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      bool all = true;
      for (int u = -k / 2; u <= k / 2; ++u)
        for (int v = -k / 2; v <= k / 2; ++v) {
          const int yy = r + u, xx = c + v;
          if (yy < 0 || yy >= h || xx < 0 || xx >= w || m[yy * w + xx] < 0.5) all = false;
        }
      out[r * w + c] = all ? 1.0 : 0.0;
    }
  return out;
}

// ---- losses --------------------------------------------------------------------

// 1 - mean SSIM over every fully covered window, statistics computed per window
// directly from the 2-D Gaussian weights.
inline double ssim_loss(const Vec& x, const Vec& y, int h, int w, int win = 11, double sigma = 1.5,
                        double c1 = 1e-4, double c2 = 9e-4) {
  std::vector<double> g2(static_cast<std::size_t>(win * win));
  double total = 0;
  for (int u = 0; u < win; ++u)
    for (int v = 0; v < win; ++v) {
      const double du = u - win / 2, dv = v - win / 2;
      g2[u * win + v] = std::exp(-(du * du + dv * dv) / (2 * sigma * sigma));
      total += g2[u * win + v];
    }
  for (auto& g : g2) g /= total;
  double acc = 0;
  int count = 0;
  for (int r = 0; r + win <= h; ++r)
    for (int c = 0; c + win <= w; ++c) {
      double mx = 0, my = 0;
      for (int u = 0; u < win; ++u)
        for (int v = 0; v < win; ++v) {
          mx += g2[u * win + v] * x[(r + u) * w + c + v];
          my += g2[u * win + v] * y[(r + u) * w + c + v];
        }
      double vx = 0, vy = 0, cxy = 0;
      for (int u = 0; u < win; ++u)
        for (int v = 0; v < win; ++v) {
          const double a = x[(r + u) * w + c + v], b = y[(r + u) * w + c + v];
          vx += g2[u * win + v] * a * a;
          vy += g2[u * win + v] * b * b;
          cxy += g2[u * win + v] * a * b;
        }
      vx -= mx * mx;
      vy -= my * my;
      cxy -= mx * my;
      acc += (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  return 1.0 - acc / count;
}

// ---- saliency metrics ----------------------------------------------------------

inline double mae(const Vec& p, const Vec& g) {
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - g[i]);
  return s / static_cast<double>(p.size());
}

// Binarization used by every sweep: positive at threshold k iff p >= k / 255.
inline bool positive_at(double p, int k) { return p >= k / 255.0; }

inline double f_beta_max(const Vec& p, const Vec& g, double beta2 = 0.3) {
  double best = 0;
  for (int k = 0; k < 256; ++k) {
    double tp = 0, fp = 0, pos = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const bool pred = positive_at(p[i], k);
      if (g[i] > 0.5) {
        pos += 1;
        if (pred) tp += 1;
      } else if (pred) {
        fp += 1;
      }
    }
    const double prec = tp + fp > 0 ? tp / (tp + fp) : 1.0;
    const double rec = tp / pos;
    const double f = beta2 * prec + rec > 0 ? (1 + beta2) * prec * rec / (beta2 * prec + rec) : 0.0;
    best = std::max(best, f);
  }
  return best;
}

// Largest threshold index a value passes.
inline int quant_level(double p) {
  int level = 0;
  for (int k = 0; k < 256; ++k)
    if (positive_at(p, k)) level = k;
  return level;
}

// Mann-Whitney form of the ROC area over quantized levels, ties counted half.
inline double auc_rank(const Vec& p, const Vec& g) {
  double wins = 0, pairs = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (g[i] < 0.5) continue;
    for (std::size_t j = 0; j < p.size(); ++j) {
      if (g[j] > 0.5) continue;
      const int a = quant_level(p[i]), b = quant_level(p[j]);
      wins += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
      pairs += 1;
    }
  }
  return wins / pairs;
}

struct DepthErrors {
  double rmse, rmse_log, abs_rel, sq_rel, p1, p2, p3;
};

inline DepthErrors depth_errors(const Vec& p, const Vec& g, const Vec& valid, double eps = 1e-6) {
  DepthErrors e{0, 0, 0, 0, 0, 0, 0};
  double n = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (valid[i] < 0.5) continue;
    const double a = std::max(p[i], eps), b = std::max(g[i], eps);
    n += 1;
    e.rmse += (a - b) * (a - b);
    e.rmse_log += (std::log(a) - std::log(b)) * (std::log(a) - std::log(b));
    e.abs_rel += std::abs(a - b) / b;
    e.sq_rel += (a - b) * (a - b) / b;
    const double r = std::max(a / b, b / a);
    e.p1 += r < 1.25 ? 1 : 0;
    e.p2 += r < 1.25 * 1.25 ? 1 : 0;
    e.p3 += r < 1.25 * 1.25 * 1.25 ? 1 : 0;
  }
  e.rmse = std::sqrt(e.rmse / n);
  e.rmse_log = std::sqrt(e.rmse_log / n);
  e.abs_rel /= n;
  e.sq_rel /= n;
  e.p1 /= n;
  e.p2 /= n;
  e.p3 /= n;
  return e;
}

// Weighted F-measure written with dense matrices: an all-pairs distance search
// for the nearest foreground pixel and a dense HW x HW Gaussian operator.
inline double weighted_f(const Vec& p, const Vec& g, int h, int w) {
  const int n = h * w;
  const double eps = std::numeric_limits<double>::epsilon();
  Vec dist(static_cast<std::size_t>(n), 0.0);
  std::vector<int> nearest(static_cast<std::size_t>(n), -1);
  for (int i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      if (g[j] < 0.5) continue;
      const double dy = i / w - j / w, dx = i % w - j % w;
      const double d2 = dy * dy + dx * dx;
      if (d2 < best) {  // strict: the first (smallest) index wins ties
        best = d2;
        nearest[i] = j;
      }
    }
    dist[i] = std::sqrt(best);
  }
  Vec err(static_cast<std::size_t>(n)), et(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) err[i] = std::abs(p[i] - g[i]);
  for (int i = 0; i < n; ++i) et[i] = g[i] > 0.5 ? err[i] : err[nearest[i]];

  std::vector<double> dense(static_cast<std::size_t>(n) * n, 0.0);
  double ksum = 0;
  for (int u = -3; u <= 3; ++u)
    for (int v = -3; v <= 3; ++v) ksum += std::exp(-(u * u + v * v) / 50.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const int du = j / w - i / w, dv = j % w - i % w;
      if (std::abs(du) <= 3 && std::abs(dv) <= 3) dense[static_cast<std::size_t>(i) * n + j] = std::exp(-(du * du + dv * dv) / 50.0) / ksum;
    }
  Vec ea(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) ea[i] += dense[static_cast<std::size_t>(i) * n + j] * et[j];

  double ew_fg = 0, ew_bg = 0, fg = 0;
  for (int i = 0; i < n; ++i) {
    if (g[i] > 0.5) {
      fg += 1;
      ew_fg += std::min(err[i], ea[i]);
    } else {
      ew_bg += err[i] * (2.0 - std::exp(std::log(0.5) / 5.0 * dist[i]));
    }
  }
  const double tpw = fg - ew_fg;
  const double r = 1.0 - ew_fg / fg;
  const double prec = tpw / (eps + tpw + ew_bg);
  return 2.0 * r * prec / (eps + r + prec);
}

// Structure measure following the published reference code, 2-D indexing.
inline double s_measure(const Vec& p, const Vec& g, int h, int w, double alpha = 0.5) {
  const double eps = std::numeric_limits<double>::epsilon();
  auto G = [&](int r, int c) { return g[r * w + c] > 0.5; };
  auto P = [&](int r, int c) { return p[r * w + c]; };
  double y = 0, pm = 0;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      y += G(r, c);
      pm += P(r, c);
    }
  y /= h * w;
  pm /= h * w;
  if (y == 0) return 1 - pm;
  if (y == 1) return pm;

  auto object = [&](bool foreground) {
    Vec vals;
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        if (G(r, c) == foreground) vals.push_back(foreground ? P(r, c) : 1 - P(r, c));
    double m = 0;
    for (double v : vals) m += v;
    m /= vals.size();
    double var = 0;
    for (double v : vals) var += (v - m) * (v - m);
    const double sd = vals.size() > 1 ? std::sqrt(var / (vals.size() - 1)) : 0.0;
    return 2 * m / (m * m + 1 + sd + eps);
  };
  const double s_object = y * object(true) + (1 - y) * object(false);

  double cx = 0, cy = 0, area = 0;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      if (G(r, c)) {
        cx += c + 1;
        cy += r + 1;
        area += 1;
      }
  const int X = static_cast<int>(std::round(cx / area)), Y = static_cast<int>(std::round(cy / area));
  auto block = [&](int r0, int r1, int c0, int c1) {  // half-open 0-based
    const double n = (r1 - r0) * (c1 - c0);
    if (n <= 0) return 0.0;
    double mx = 0, my = 0;
    for (int r = r0; r < r1; ++r)
      for (int c = c0; c < c1; ++c) {
        mx += P(r, c);
        my += G(r, c);
      }
    mx /= n;
    my /= n;
    double vx = 0, vy = 0, cov = 0;
    for (int r = r0; r < r1; ++r)
      for (int c = c0; c < c1; ++c) {
        vx += (P(r, c) - mx) * (P(r, c) - mx);
        vy += (G(r, c) - my) * (G(r, c) - my);
        cov += (P(r, c) - mx) * (G(r, c) - my);
      }
    vx /= n - 1 + eps;
    vy /= n - 1 + eps;
    cov /= n - 1 + eps;
    const double a = 4 * mx * my * cov, b = (mx * mx + my * my) * (vx + vy);
    if (a != 0) return a / (b + eps);
    return b == 0 ? 1.0 : 0.0;
  };
  const double total = h * w;
  const double s_region = X * Y / total * block(0, Y, 0, X) + (w - X) * Y / total * block(0, Y, X, w) +
                          X * (h - Y) / total * block(Y, h, 0, X) +
                          (w - X) * (h - Y) / total * block(Y, h, X, w);
  return std::max(0.0, alpha * s_object + (1 - alpha) * s_region);
}

// Enhanced alignment of one binary map, averaged over all H*W pixels.
inline double e_measure_binary(const Vec& fm, const Vec& g) {
  const double eps = std::numeric_limits<double>::epsilon();
  const double n = fm.size();
  double gs = 0, fs = 0;
  for (std::size_t i = 0; i < fm.size(); ++i) {
    gs += g[i];
    fs += fm[i];
  }
  Vec enhanced(fm.size());
  if (gs == 0) {
    for (std::size_t i = 0; i < fm.size(); ++i) enhanced[i] = 1 - fm[i];
  } else if (gs == n) {
    enhanced = fm;
  } else {
    for (std::size_t i = 0; i < fm.size(); ++i) {
      const double a = g[i] - gs / n, b = fm[i] - fs / n;
      const double align = 2 * a * b / (a * a + b * b + eps);
      enhanced[i] = (align + 1) * (align + 1) / 4;
    }
  }
  double s = 0;
  for (double e : enhanced) s += e;
  return s / n;
}

inline double e_measure(const Vec& p, const Vec& g) {
  double best = 0;
  for (int k = 0; k < 256; ++k) {
    Vec fm(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) fm[i] = positive_at(p[i], k) ? 1.0 : 0.0;
    best = std::max(best, e_measure_binary(fm, g));
  }
  return best;
}

// ---- optimizer -----------------------------------------------------------------

struct ScalarAdam {
  double m = 0, v = 0;
  int t = 0;
  double step(double x, double grad, double lr, double b1 = 0.9, double b2 = 0.999, double eps = 1e-8) {
    ++t;
    m = b1 * m + (1 - b1) * grad;
    v = b2 * v + (1 - b2) * grad * grad;
    const double mh = m / (1 - std::pow(b1, t)), vh = v / (1 - std::pow(b2, t));
    return x - lr * mh / (std::sqrt(vh) + eps);
  }
};

}  // namespace oracle
