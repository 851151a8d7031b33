#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "exp4stab/experts.hpp"
#include "exp4stab/format.hpp"

namespace exp4stab {

namespace {

constexpr const char* kMagic = "exp4stab-experts";
constexpr int kVersion = 1;

void write_row(std::ostream& out, const auto& row) {
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    if (j) out << ' ';
    out << format_double(row[j]);
  }
  out << '\n';
}

class TokenReader {
 public:
  explicit TokenReader(std::istream& in) : in_(in) {}

  std::string word() {
    std::string w;
    if (!(in_ >> w)) throw std::runtime_error("expert file: unexpected end of input");
    return w;
  }
  void expect(const std::string& keyword) {
    const std::string w = word();
    if (w != keyword) throw std::runtime_error("expert file: expected '" + keyword + "', got '" + w + "'");
  }
  long integer() {
    const std::string w = word();
    long v = 0;
    const auto res = std::from_chars(w.data(), w.data() + w.size(), v);
    if (res.ec != std::errc() || res.ptr != w.data() + w.size())
      throw std::runtime_error("expert file: expected integer, got '" + w + "'");
    return v;
  }
  double real() {
    const std::string w = word();
    try {
      return parse_double(w);
    } catch (const std::invalid_argument&) {
      throw std::runtime_error("expert file: expected number, got '" + w + "'");
    }
  }
  Eigen::MatrixXd matrix(long rows, long cols) {
    if (rows < 1 || cols < 1) throw std::runtime_error("expert file: nonpositive dimension");
    Eigen::MatrixXd m(rows, cols);
    for (long r = 0; r < rows; ++r)
      for (long c = 0; c < cols; ++c) m(r, c) = real();
    return m;
  }

 private:
  std::istream& in_;
};

}  // namespace

void save_experts(std::ostream& out, const ExpertSet& experts) {
  out << kMagic << ' ' << kVersion << '\n';
  out << "count " << experts.size() << '\n';
  for (const auto& expert : experts.experts()) {
    if (const auto* s = std::get_if<SoftmaxExpert>(&expert)) {
      out << "softmax " << s->num_actions() << ' ' << s->input_dim() << '\n';
      for (Eigen::Index r = 0; r < s->weights().rows(); ++r) write_row(out, s->weights().row(r));
    } else if (const auto* n = std::get_if<NeuralExpert>(&expert)) {
      out << "neural " << n->layers().size() << '\n';
      for (const auto& layer : n->layers()) {
        out << "layer " << layer.weight.rows() << ' ' << layer.weight.cols() << '\n';
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) write_row(out, layer.weight.row(r));
        write_row(out, layer.bias);
      }
    } else {
      out << "uniform " << std::get<UniformExpert>(expert).num_actions() << '\n';
    }
  }
}

ExpertSet load_experts(std::istream& in) {
  TokenReader reader(in);
  reader.expect(kMagic);
  if (reader.integer() != kVersion) throw std::runtime_error("expert file: unsupported version");
  reader.expect("count");
  const long count = reader.integer();
  if (count < 1) throw std::runtime_error("expert file: count must be positive");
  std::vector<ExpertPolicy> experts;
  for (long k = 0; k < count; ++k) {
    const std::string kind = reader.word();
    if (kind == "softmax") {
      const long rows = reader.integer();
      const long cols = reader.integer();
      experts.emplace_back(SoftmaxExpert(reader.matrix(rows, cols)));
    } else if (kind == "neural") {
      const long n_layers = reader.integer();
      if (n_layers < 1) throw std::runtime_error("expert file: neural expert needs layers");
      std::vector<DenseLayer> layers;
      for (long i = 0; i < n_layers; ++i) {
        reader.expect("layer");
        const long rows = reader.integer();
        const long cols = reader.integer();
        DenseLayer layer;
        layer.weight = reader.matrix(rows, cols);
        layer.bias = reader.matrix(rows, 1).col(0);
        layers.push_back(std::move(layer));
      }
      experts.emplace_back(NeuralExpert(std::move(layers)));
    } else if (kind == "uniform") {
      experts.emplace_back(UniformExpert(static_cast<int>(reader.integer())));
    } else {
      throw std::runtime_error("expert file: unknown expert kind '" + kind + "'");
    }
  }
  return ExpertSet(std::move(experts));
}

}  // namespace exp4stab
