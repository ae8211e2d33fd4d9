#include "mvl/dcca.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "mvl/linalg.hpp"

namespace mvl {

namespace {

struct Whitened {
  Matrix code_centered;   // N x d_C (centered when opt.center)
  Matrix text_centered;   // N x d_A
  Matrix code_mean;       // 1 x d_C (zeros when centering is off)
  Matrix text_mean;
  Matrix cov_code;        // (1/N) Mc'Mc + r I
  Matrix cov_text;
  Matrix cov_cross;       // (1/N) Mc'Ma
  Matrix inv_sqrt_code;
  Matrix inv_sqrt_text;
  Matrix t;               // whitened cross-covariance
};

Whitened whiten(const ViewBatch& batch, double r_code, double r_text, bool center) {
  const int n = batch.code_view.rows();
  if (n <= 1) throw std::invalid_argument("dcca: need at least two rows");
  if (batch.text_view.rows() != n) throw std::invalid_argument("dcca: view row counts differ");
  if (!batch.code_view.all_finite() || !batch.text_view.all_finite()) {
    throw std::invalid_argument("dcca: non-finite inputs");
  }

  Whitened w;
  w.code_centered = batch.code_view;
  w.text_centered = batch.text_view;
  w.code_mean = Matrix(1, batch.code_view.cols());
  w.text_mean = Matrix(1, batch.text_view.cols());
  if (center) {
    w.code_mean = w.code_centered.col_mean();
    w.text_mean = w.text_centered.col_mean();
    w.code_centered.sub_row_vector(w.code_mean);
    w.text_centered.sub_row_vector(w.text_mean);
  }

  const double inv_n = 1.0 / n;
  w.cov_code = matmul(w.code_centered, w.code_centered, true, false);
  w.cov_code.scale(inv_n);
  for (int i = 0; i < w.cov_code.rows(); ++i) w.cov_code(i, i) += r_code;
  w.cov_text = matmul(w.text_centered, w.text_centered, true, false);
  w.cov_text.scale(inv_n);
  for (int i = 0; i < w.cov_text.rows(); ++i) w.cov_text(i, i) += r_text;
  w.cov_cross = matmul(w.code_centered, w.text_centered, true, false);
  w.cov_cross.scale(inv_n);

  w.inv_sqrt_code = inv_sqrt_psd(w.cov_code);
  w.inv_sqrt_text = inv_sqrt_psd(w.cov_text);
  w.t = matmul(matmul(w.inv_sqrt_code, w.cov_cross), w.inv_sqrt_text);
  return w;
}

void check_dims(const ViewBatch& batch, int dims) {
  if (dims < 1 || dims > std::min(batch.code_view.cols(), batch.text_view.cols())) {
    throw std::invalid_argument("dcca: L outside [1, min(d_C, d_A)]");
  }
}

// Undo column centering: the mean map is (I - 11'/N), which is symmetric,
// so the pullback just removes each column's mean from the gradient.
void decenter_gradient(Matrix& g) {
  Matrix mean = g.col_mean();
  g.sub_row_vector(mean);
}

Matrix first_cols(const Matrix& m, int k) {
  Matrix out(m.rows(), k);
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < k; ++c) out(r, c) = m(r, c);
  }
  return out;
}

}  // namespace

double total_correlation(const ViewBatch& batch, const DccaOptions& opt) {
  check_dims(batch, opt.dims);
  Whitened w = whiten(batch, opt.r_code, opt.r_text, opt.center);
  std::vector<double> s = singular_values(w.t);
  double sum = 0.0;
  for (int i = 0; i < opt.dims; ++i) sum += s[i];
  return sum;
}

DccaGradient dcca_gradient(const ViewBatch& batch, const DccaOptions& opt) {
  check_dims(batch, opt.dims);
  const int n = batch.code_view.rows();
  const int l = opt.dims;

  double r_code = opt.r_code;
  double r_text = opt.r_text;
  for (int attempt = 0;; ++attempt) {
    Whitened w = whiten(batch, r_code, r_text, opt.center);
    Svd svd = thin_svd(w.t);
    const int k = static_cast<int>(svd.s.size());
    const double gap = (l < k) ? svd.s[l - 1] - svd.s[l] : 1.0;
    if (gap <= 1e-8) {
      if (attempt >= 1) {
        throw std::runtime_error("dcca_gradient: non-differentiable top-L boundary (degenerate gap)");
      }
      // Jitter the regularizers and retry once.
      r_code *= (1.0 + 1e-6);
      r_text *= (1.0 + 1e-6);
      continue;
    }

    Matrix p_l = first_cols(svd.u, l);
    Matrix q_l = first_cols(svd.v, l);

    DccaGradient out;
    for (int i = 0; i < l; ++i) out.correlation += svd.s[i];

    // d corr / d Sigma_CA = Ci P_L Q_L' Ai
    Matrix grad_cross = matmul(matmul(w.inv_sqrt_code, p_l), matmul(q_l, w.inv_sqrt_text, true, false));

    // d corr / d Sigma_CC = -1/2 Ci P_L S_L P_L' Ci (and likewise for AA)
    Matrix ps = p_l;
    for (int i = 0; i < l; ++i) {
      for (int r = 0; r < ps.rows(); ++r) ps(r, i) *= svd.s[i];
    }
    Matrix grad_cc = matmul(matmul(w.inv_sqrt_code, ps), matmul(p_l, w.inv_sqrt_code, true, false));
    grad_cc.scale(-0.5);

    Matrix qs = q_l;
    for (int i = 0; i < l; ++i) {
      for (int r = 0; r < qs.rows(); ++r) qs(r, i) *= svd.s[i];
    }
    Matrix grad_aa = matmul(matmul(w.inv_sqrt_text, qs), matmul(q_l, w.inv_sqrt_text, true, false));
    grad_aa.scale(-0.5);

    const double inv_n = 1.0 / n;
    out.d_code = matmul(w.code_centered, grad_cc);
    out.d_code.scale(2.0);
    matmul_acc(out.d_code, w.text_centered, grad_cross, false, true);
    out.d_code.scale(inv_n);

    out.d_text = matmul(w.text_centered, grad_aa);
    out.d_text.scale(2.0);
    matmul_acc(out.d_text, w.code_centered, grad_cross, false, false);
    out.d_text.scale(inv_n);

    if (opt.center) {
      decenter_gradient(out.d_code);
      decenter_gradient(out.d_text);
    }
    return out;
  }
}

DccaProjection compute_projections(const ViewBatch& full_train, const DccaOptions& opt) {
  check_dims(full_train, opt.dims);
  Whitened w = whiten(full_train, opt.r_code, opt.r_text, opt.center);
  Svd svd = thin_svd(w.t);
  if (svd.s[opt.dims - 1] <= 1e-10) {
    throw std::runtime_error("compute_projections: views are rank deficient below L after regularization");
  }
  DccaProjection proj;
  proj.u = matmul(w.inv_sqrt_code, first_cols(svd.u, opt.dims));
  proj.v = matmul(w.inv_sqrt_text, first_cols(svd.v, opt.dims));
  proj.code_mean = w.code_mean;
  proj.text_mean = w.text_mean;
  proj.r_code = opt.r_code;
  proj.r_text = opt.r_text;
  proj.dims = opt.dims;
  return proj;
}

Matrix project(const Matrix& g_out, const DccaProjection& proj, View view) {
  const Matrix& map = (view == View::kCode) ? proj.u : proj.v;
  const Matrix& mean = (view == View::kCode) ? proj.code_mean : proj.text_mean;
  if (g_out.cols() != map.rows()) {
    throw std::invalid_argument("project: input width " + g_out.shape_str() + " does not match projection");
  }
  Matrix centered = g_out;
  centered.sub_row_vector(mean);
  return matmul(centered, map);
}

std::vector<double> cca_oracle(const Matrix& x, const Matrix& y, double r) {
  const int n = x.rows();
  if (n <= 1 || y.rows() != n) throw std::invalid_argument("cca_oracle: bad row counts");

  Matrix xc = x, yc = y;
  xc.sub_row_vector(xc.col_mean());
  yc.sub_row_vector(yc.col_mean());

  const double inv_n = 1.0 / n;
  Matrix sxx = matmul(xc, xc, true, false);
  sxx.scale(inv_n);
  for (int i = 0; i < sxx.rows(); ++i) sxx(i, i) += r;
  Matrix syy = matmul(yc, yc, true, false);
  syy.scale(inv_n);
  for (int i = 0; i < syy.rows(); ++i) syy(i, i) += r;

  // Whiten the data matrices themselves, then take the cross-covariance.
  Matrix xw = matmul(xc, inv_sqrt_psd(sxx));
  Matrix yw = matmul(yc, inv_sqrt_psd(syy));
  Matrix cross = matmul(xw, yw, true, false);
  cross.scale(inv_n);
  return singular_values(cross);
}

namespace {

void write_doubles(std::ofstream& out, const Matrix& m) {
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
}

Matrix read_doubles(std::ifstream& in, int rows, int cols) {
  Matrix m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  return m;
}

constexpr char kProjMagic[8] = {'M', 'V', 'L', 'P', 'R', 'O', 'J', '1'};

}  // namespace

void save_projection(const DccaProjection& proj, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write projection file: " + path);
  out.write(kProjMagic, 8);
  const int32_t dims[3] = {proj.u.rows(), proj.v.rows(), proj.dims};
  out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  const double regs[2] = {proj.r_code, proj.r_text};
  out.write(reinterpret_cast<const char*>(regs), sizeof(regs));
  write_doubles(out, proj.code_mean);
  write_doubles(out, proj.text_mean);
  write_doubles(out, proj.u);
  write_doubles(out, proj.v);
  if (!out) throw std::runtime_error("failed writing projection file: " + path);
}

DccaProjection load_projection(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open projection file: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kProjMagic, 8) != 0) {
    throw std::runtime_error("not a projection file: " + path);
  }
  int32_t dims[3];
  in.read(reinterpret_cast<char*>(dims), sizeof(dims));
  double regs[2];
  in.read(reinterpret_cast<char*>(regs), sizeof(regs));
  DccaProjection proj;
  proj.r_code = regs[0];
  proj.r_text = regs[1];
  proj.dims = dims[2];
  proj.code_mean = read_doubles(in, 1, dims[0]);
  proj.text_mean = read_doubles(in, 1, dims[1]);
  proj.u = read_doubles(in, dims[0], dims[2]);
  proj.v = read_doubles(in, dims[1], dims[2]);
  if (!in) throw std::runtime_error("truncated projection file: " + path);
  return proj;
}

}  // namespace mvl
