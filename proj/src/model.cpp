#include "loralab/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "loralab/kernels.hpp"
#include "loralab/rng.hpp"

namespace loralab::model {

namespace {

// Substream tags: every weight tensor draws from its own Gaussian stream, so
// the frozen backbone is identical across init schemes for a given seed.
constexpr std::uint64_t kTagWIn = 1;
constexpr std::uint64_t kTagWH = 2;
constexpr std::uint64_t kTagWOut = 3;
constexpr std::uint64_t kTagLoraA = 4;
constexpr std::uint64_t kTagLoraB = 5;
constexpr std::uint64_t kTagData = 6;

Matrix gaussian_matrix(std::uint64_t stream_seed, int rows, int cols, double stddev) {
  Matrix m(rows, cols);
  rng::GaussianStream stream(stream_seed);
  stream.fill_normal(m.data.data(), m.size(), stddev);
  return m;
}

}  // namespace

void ModelConfig::validate() const {
  if (d < 1) throw std::invalid_argument("model: d must be >= 1");
  if (n < 1) throw std::invalid_argument("model: n must be >= 1");
  if (r < 1) throw std::invalid_argument("model: r must be >= 1");
  if (r > n) throw std::invalid_argument("model: r must be <= n");
}

TeacherParams init_teacher(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  TeacherParams t;
  t.cfg = cfg;
  t.w_in = gaussian_matrix(rng::mix({seed, kTagWIn}), cfg.n, cfg.d, 1.0 / std::sqrt(cfg.d));
  t.w_out = gaussian_matrix(rng::mix({seed, kTagWOut}), 1, cfg.n, 1.0 / std::sqrt(cfg.n));
  t.a = gaussian_matrix(rng::mix({seed, kTagLoraA}), cfg.r, cfg.n, 1.0 / std::sqrt(cfg.n));
  t.bt = gaussian_matrix(rng::mix({seed, kTagLoraB}), cfg.r, cfg.n, 1.0 / std::sqrt(cfg.r));
  return t;
}

std::vector<double> teacher_predict(const TeacherParams& teacher, const Matrix& inputs) {
  const int n = teacher.cfg.n;
  const int r = teacher.cfg.r;
  const double scale = teacher.cfg.scale();
  std::vector<double> h(n), u(n), zb(n), v(n), za(r), y(inputs.rows);
  for (int s = 0; s < inputs.rows; ++s) {
    const double* x = inputs.row(s);
    for (int j = 0; j < n; ++j) h[j] = kernels::dot(teacher.w_in.row(j), x, inputs.cols);
    kernels::relu(h.data(), u.data(), n);
    for (int i = 0; i < r; ++i) za[i] = kernels::dot(teacher.a.row(i), u.data(), n);
    std::fill(zb.begin(), zb.end(), 0.0);
    for (int i = 0; i < r; ++i) kernels::axpy(scale * za[i], teacher.bt.row(i), zb.data(), n);
    // W_h is identically zero for the teacher, so yh = h + zb.
    y[s] = kernels::add_relu_dot(h.data(), zb.data(), teacher.w_out.row(0), v.data(), n);
  }
  return y;
}

Dataset gen_dataset(const TeacherParams& teacher, int count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("gen_dataset: count must be >= 1");
  Dataset data;
  data.inputs = gaussian_matrix(rng::mix({seed, kTagData}), count, teacher.cfg.d, 1.0);
  data.targets = teacher_predict(teacher, data.inputs);
  return data;
}

void w_h_row_fill(std::uint64_t seed, int n, int row, double* out) {
  rng::GaussianStream stream(rng::mix({seed, kTagWH, static_cast<std::uint64_t>(row)}));
  stream.fill_normal(out, static_cast<std::size_t>(n), 1.0 / std::sqrt(n));
}

StudentState init_student(const ModelConfig& cfg, gamma::InitScheme scheme, std::uint64_t seed,
                          bool materialize_w_h) {
  cfg.validate();
  StudentState s;
  s.cfg = cfg;
  s.scheme = scheme;
  s.seed = seed;
  s.w_in = gaussian_matrix(rng::mix({seed, kTagWIn}), cfg.n, cfg.d, 1.0 / std::sqrt(cfg.d));
  s.w_out = gaussian_matrix(rng::mix({seed, kTagWOut}), 1, cfg.n, 1.0 / std::sqrt(cfg.n));
  if (materialize_w_h) {
    s.w_h = Matrix(cfg.n, cfg.n);
    for (int i = 0; i < cfg.n; ++i) w_h_row_fill(seed, cfg.n, i, s.w_h.row(i));
  }
  if (scheme == gamma::InitScheme::A) {
    s.a = gaussian_matrix(rng::mix({seed, kTagLoraA}), cfg.r, cfg.n, 1.0 / std::sqrt(cfg.n));
    s.bt = Matrix(cfg.r, cfg.n);
  } else {
    s.a = Matrix(cfg.r, cfg.n);
    s.bt = gaussian_matrix(rng::mix({seed, kTagLoraB}), cfg.r, cfg.n, 1.0 / std::sqrt(cfg.r));
  }
  return s;
}

ForwardTrace forward(const StudentState& student, const Matrix& inputs) {
  if (inputs.rows < 1) throw std::invalid_argument("forward: empty batch");
  if (inputs.cols != student.cfg.d) throw std::invalid_argument("forward: input dim != d");
  if (!student.w_h_materialized())
    throw std::logic_error("forward: student was initialized without a materialized W_h");

  const int n = student.cfg.n;
  const int r = student.cfg.r;
  const int batch = inputs.rows;
  const double scale = student.cfg.scale();

  ForwardTrace t;
  t.h = Matrix(batch, n);
  t.u = Matrix(batch, n);
  t.za = Matrix(batch, r);
  t.zb = Matrix(batch, n);
  t.g = Matrix(batch, n);
  t.yh = Matrix(batch, n);
  t.v = Matrix(batch, n);
  t.y.resize(batch);

  std::vector<double> hg(n);
  for (int s = 0; s < batch; ++s) {
    const double* x = inputs.row(s);
    double* h = t.h.row(s);
    double* u = t.u.row(s);
    double* za = t.za.row(s);
    double* zb = t.zb.row(s);
    double* g = t.g.row(s);
    double* yh = t.yh.row(s);
    for (int j = 0; j < n; ++j) h[j] = kernels::dot(student.w_in.row(j), x, student.cfg.d);
    kernels::relu(h, u, n);
    for (int j = 0; j < n; ++j) g[j] = kernels::dot(student.w_h.row(j), u, n);
    for (int i = 0; i < r; ++i) za[i] = kernels::dot(student.a.row(i), u, n);
    for (int i = 0; i < r; ++i) kernels::axpy(scale * za[i], student.bt.row(i), zb, n);
    for (int j = 0; j < n; ++j) hg[j] = h[j] + g[j];
    for (int j = 0; j < n; ++j) yh[j] = hg[j] + zb[j];
    t.y[s] = kernels::add_relu_dot(hg.data(), zb, student.w_out.row(0), t.v.row(s), n);
  }
  return t;
}

double mse_loss(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size())
    throw std::invalid_argument("mse_loss: length mismatch");
  if (predictions.empty()) throw std::invalid_argument("mse_loss: empty batch");
  double acc = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double e = predictions[i] - targets[i];
    acc += e * e;
  }
  return acc / static_cast<double>(predictions.size());
}

Grads backward(const StudentState& student, const ForwardTrace& trace,
               std::span<const double> targets) {
  const int n = student.cfg.n;
  const int r = student.cfg.r;
  const int batch = trace.v.rows;
  if (static_cast<std::size_t>(batch) != targets.size())
    throw std::invalid_argument("backward: batch/target mismatch");
  if (trace.v.cols != n || trace.za.cols != r)
    throw std::invalid_argument("backward: trace does not match student shapes");
  const double scale = student.cfg.scale();

  Grads grads;
  grads.da = Matrix(r, n);
  grads.dbt = Matrix(r, n);
  grads.dyh = Matrix(batch, n);

  for (int s = 0; s < batch; ++s) {
    const double e = trace.y[s] - targets[s];
    const double dy = (2.0 * e) / static_cast<double>(batch);
    double* dyh = grads.dyh.row(s);
    kernels::masked_grad(dy, student.w_out.row(0), trace.v.row(s), dyh, n);
    const double* u = trace.u.row(s);
    const double* za = trace.za.row(s);
    for (int i = 0; i < r; ++i) {
      const double q = kernels::dot(dyh, student.bt.row(i), n);
      kernels::axpy(scale * q, u, grads.da.row(i), n);
    }
    for (int i = 0; i < r; ++i) kernels::axpy(scale * za[i], dyh, grads.dbt.row(i), n);
  }
  return grads;
}

std::pair<double, double> feature_norms(const StudentState& student, const Dataset& data) {
  if (data.size() < 1) throw std::invalid_argument("feature_norms: empty dataset");
  const ForwardTrace trace = forward(student, data.inputs);
  double za_acc = 0.0;
  double zb_acc = 0.0;
  for (int s = 0; s < data.size(); ++s) {
    za_acc += std::sqrt(kernels::sum_sq(trace.za.row(s), student.cfg.r));
    zb_acc += std::sqrt(kernels::sum_sq(trace.zb.row(s), student.cfg.n));
  }
  const double count = static_cast<double>(data.size());
  return {za_acc / count, zb_acc / count};
}

namespace {

void append_le_doubles(std::ofstream& out, const double* data, std::size_t count) {
  static_assert(sizeof(double) == 8);
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 8));
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, &data[i], 8);
      char bytes[8];
      for (int b = 0; b < 8; ++b) bytes[b] = static_cast<char>(bits >> (8 * b));
      out.write(bytes, 8);
    }
  }
}

}  // namespace

void save_snapshot(const StudentState& student, const std::string& path_prefix) {
  const int n = student.cfg.n;
  const int r = student.cfg.r;

  std::ofstream bin(path_prefix + ".bin", std::ios::binary | std::ios::trunc);
  if (!bin) throw std::runtime_error("save_snapshot: cannot open " + path_prefix + ".bin");

  nlohmann::json tensors = nlohmann::json::array();
  std::size_t offset = 0;
  auto emit = [&](const char* tensor_name, int rows, int cols, const double* data,
                  std::size_t count) {
    append_le_doubles(bin, data, count);
    tensors.push_back({{"name", tensor_name}, {"shape", {rows, cols}}, {"offset", offset},
                       {"count", count}});
    offset += count;
  };

  emit("w_in", n, student.cfg.d, student.w_in.data.data(), student.w_in.size());
  if (student.w_h_materialized()) emit("w_h", n, n, student.w_h.data.data(), student.w_h.size());
  emit("w_out", 1, n, student.w_out.data.data(), student.w_out.size());
  emit("a", r, n, student.a.data.data(), student.a.size());
  // B is stored transposed internally; write it in its logical n x r shape.
  Matrix b(n, r);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < n; ++j) b.at(j, i) = student.bt.at(i, j);
  emit("b", n, r, b.data.data(), b.size());
  bin.close();

  nlohmann::json sidecar{{"schema_version", 1},
                         {"dtype", "float64-le"},
                         {"offsets_in", "elements"},
                         {"tensors", tensors}};
  std::ofstream js(path_prefix + ".json", std::ios::trunc);
  if (!js) throw std::runtime_error("save_snapshot: cannot open " + path_prefix + ".json");
  js << sidecar.dump(2) << '\n';
}

}  // namespace loralab::model
