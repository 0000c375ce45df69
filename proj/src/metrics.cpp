#include "urbanfuture/metrics.hpp"

#include <Eigen/Eigenvalues>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "urbanfuture/error.hpp"

namespace urbanfuture {

namespace {

void require_same_shape(const ImageU8& a, const ImageU8& b) {
  if (!a.same_shape(b)) {
    throw Error(ErrorKind::DimensionMismatch,
                "crop sizes differ: " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                    "x" + std::to_string(a.channels) + " vs " + std::to_string(b.width) + "x" +
                    std::to_string(b.height) + "x" + std::to_string(b.channels));
  }
  if (a.empty()) throw Error(ErrorKind::EmptyInput, "crops are empty");
}

// "Valid" separable filtering of an image with a 1D kernel along both axes.
Eigen::MatrixXd filter_valid(const Eigen::MatrixXd& img, const Eigen::VectorXd& g) {
  const Eigen::Index k = g.size();
  const Eigen::Index rows = img.rows() - k + 1, cols = img.cols() - k + 1;
  Eigen::MatrixXd horizontal(img.rows(), cols);
  for (Eigen::Index c = 0; c < cols; ++c) horizontal.col(c) = img.middleCols(c, k) * g;
  Eigen::MatrixXd out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) out.row(r) = g.transpose() * horizontal.middleRows(r, k);
  return out;
}

double ssim_term(double mx, double my, double vx, double vy, double cxy, const SsimConstants& k) {
  return ((2 * mx * my + k.c1) * (2 * cxy + k.c2)) / ((mx * mx + my * my + k.c1) * (vx + vy + k.c2));
}

Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()));
  Eigen::VectorXd ev = eig.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < -1e-8) {
      throw Error(ErrorKind::NonPsdCovariance, std::string(what) + " has eigenvalue " + std::to_string(ev[i]));
    }
    ev[i] = std::sqrt(std::max(ev[i], 0.0));
  }
  return eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
}

double single_inception_score(const Eigen::MatrixXd& p) {
  const Eigen::RowVectorXd marginal = p.colwise().mean();
  double kl_sum = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    double kl = 0.0;
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      const double pij = p(i, j);
      if (pij > 0.0) kl += pij * std::log(pij / marginal[j]);
    }
    kl_sum += kl;
  }
  return std::exp(kl_sum / double(p.rows()));
}

std::string fixed(double v, int precision = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

}  // namespace

double mse(const ImageU8& target, const ImageU8& predicted) {
  require_same_shape(target, predicted);
  double sum = 0.0;
  for (std::size_t i = 0; i < target.data.size(); ++i) {
    const double d = double(target.data[i]) - double(predicted.data[i]);
    sum += d * d;
  }
  return sum / double(target.data.size());
}

Eigen::MatrixXd to_gray(const ImageU8& image) {
  Eigen::MatrixXd g(image.height, image.width);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      g(y, x) = image.channels >= 3
                    ? 0.299 * image.at(x, y, 0) + 0.587 * image.at(x, y, 1) + 0.114 * image.at(x, y, 2)
                    : double(image.at(x, y, 0));
    }
  }
  return g;
}

Eigen::VectorXd gaussian_window(int size, double sigma) {
  Eigen::VectorXd g(size);
  const double centre = (size - 1) / 2.0;
  for (int i = 0; i < size; ++i) g[i] = std::exp(-((i - centre) * (i - centre)) / (2 * sigma * sigma));
  return g / g.sum();
}

double ssim(const ImageU8& target, const ImageU8& predicted, const SsimConstants& k) {
  require_same_shape(target, predicted);
  const Eigen::MatrixXd x = to_gray(target);
  const Eigen::MatrixXd y = to_gray(predicted);
  if (x.rows() < k.window || x.cols() < k.window) {
    const double mx = x.mean(), my = y.mean();
    const double vx = (x.array() - mx).square().mean();
    const double vy = (y.array() - my).square().mean();
    const double cxy = ((x.array() - mx) * (y.array() - my)).mean();
    return ssim_term(mx, my, vx, vy, cxy, k);
  }
  const Eigen::VectorXd g = gaussian_window(k.window, k.sigma);
  const Eigen::MatrixXd mx = filter_valid(x, g);
  const Eigen::MatrixXd my = filter_valid(y, g);
  const Eigen::MatrixXd xx = filter_valid(x.cwiseProduct(x), g);
  const Eigen::MatrixXd yy = filter_valid(y.cwiseProduct(y), g);
  const Eigen::MatrixXd xy = filter_valid(x.cwiseProduct(y), g);
  double sum = 0.0;
  for (Eigen::Index r = 0; r < mx.rows(); ++r) {
    for (Eigen::Index c = 0; c < mx.cols(); ++c) {
      const double ux = mx(r, c), uy = my(r, c);
      sum += ssim_term(ux, uy, xx(r, c) - ux * ux, yy(r, c) - uy * uy, xy(r, c) - ux * uy, k);
    }
  }
  return sum / double(mx.size());
}

FeatureStats feature_stats(const Eigen::MatrixXd& features) {
  if (features.rows() < 2) {
    throw Error(ErrorKind::EmptyInput, "feature statistics need at least two samples");
  }
  FeatureStats s;
  s.n = features.rows();
  s.mean = features.colwise().mean().transpose();
  const Eigen::MatrixXd centred = features.rowwise() - s.mean.transpose();
  s.cov = (centred.transpose() * centred) / double(s.n - 1);
  return s;
}

double fid(const FeatureStats& target, const FeatureStats& predicted) {
  const Eigen::Index d = target.mean.size();
  if (predicted.mean.size() != d || target.cov.rows() != d || target.cov.cols() != d ||
      predicted.cov.rows() != d || predicted.cov.cols() != d) {
    throw Error(ErrorKind::DimensionMismatch, "feature dimensions differ");
  }
  for (const auto* c : {&target.cov, &predicted.cov}) {
    if ((*c - c->transpose()).cwiseAbs().maxCoeff() > 1e-9) {
      throw Error(ErrorKind::NonPsdCovariance, "covariance is not symmetric");
    }
  }
  const Eigen::MatrixXd root_t = symmetric_sqrt(target.cov, "target covariance");
  const Eigen::MatrixXd inner = root_t * predicted.cov * root_t;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  double trace_sqrt = 0.0;
  for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i) {
    const double ev = eig.eigenvalues()[i];
    if (ev < -1e-8) {
      throw Error(ErrorKind::NonPsdCovariance, "covariance product has eigenvalue " + std::to_string(ev));
    }
    trace_sqrt += std::sqrt(std::max(ev, 0.0));
  }
  const double value = (target.mean - predicted.mean).squaredNorm() + target.cov.trace() +
                       predicted.cov.trace() - 2.0 * trace_sqrt;
  return std::max(value, 0.0);
}

InceptionScore inception_score(const Eigen::MatrixXd& p, int splits) {
  if (p.rows() == 0 || p.cols() == 0) throw Error(ErrorKind::EmptyInput, "no probability rows");
  if (splits < 1 || splits > p.rows()) {
    throw Error(ErrorKind::InvalidArgument, "split count must be in [1, rows]");
  }
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    if (!p.row(i).allFinite() || p.row(i).minCoeff() < 0.0 || std::abs(p.row(i).sum() - 1.0) > 1e-9) {
      throw Error(ErrorKind::InvalidDistribution, "row " + std::to_string(i) + " is not a probability vector");
    }
  }
  std::vector<double> scores;
  for (int s = 0; s < splits; ++s) {
    const Eigen::Index begin = p.rows() * s / splits, end = p.rows() * (s + 1) / splits;
    scores.push_back(single_inception_score(p.middleRows(begin, end - begin)));
  }
  InceptionScore out;
  out.mean = 0.0;
  for (double v : scores) out.mean += v;
  out.mean /= double(scores.size());
  double var = 0.0;
  for (double v : scores) var += (v - out.mean) * (v - out.mean);
  out.stddev = std::sqrt(var / double(scores.size()));
  return out;
}

Eigen::MatrixXd read_matrix_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::MissingFile, "cannot open " + path.string());
  std::array<char, 4> magic{};
  std::array<unsigned char, 8> dims{};
  in.read(magic.data(), 4);
  in.read(reinterpret_cast<char*>(dims.data()), 8);
  if (!in || std::memcmp(magic.data(), "UFM1", 4) != 0) {
    throw Error(ErrorKind::ParseError, path.string() + ": bad matrix file header");
  }
  auto u32 = [&](int o) {
    return std::uint32_t(dims[std::size_t(o)]) | std::uint32_t(dims[std::size_t(o) + 1]) << 8 |
           std::uint32_t(dims[std::size_t(o) + 2]) << 16 | std::uint32_t(dims[std::size_t(o) + 3]) << 24;
  };
  const std::uint32_t rows = u32(0), cols = u32(4);
  std::vector<float> values(std::size_t(rows) * cols);
  in.read(reinterpret_cast<char*>(values.data()), std::streamsize(values.size() * sizeof(float)));
  if (in.gcount() != std::streamsize(values.size() * sizeof(float))) {
    throw Error(ErrorKind::ParseError, path.string() + ": truncated matrix data");
  }
  Eigen::MatrixXd m(rows, cols);
  for (std::uint32_t r = 0; r < rows; ++r) {
    for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = values[std::size_t(r) * cols + c];
  }
  return m;
}

void write_matrix_file(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write("UFM1", 4);
  for (std::uint32_t v : {std::uint32_t(m.rows()), std::uint32_t(m.cols())}) {
    const std::array<char, 4> le{char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff),
                                 char((v >> 24) & 0xff)};
    out.write(le.data(), 4);
  }
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const float f = float(m(r, c));
      out.write(reinterpret_cast<const char*>(&f), sizeof f);
    }
  }
}

ClipReport evaluate_clip(const std::vector<HorizonInput>& horizons, const SsimConstants& k,
                         int inception_splits) {
  ClipReport report;
  for (const auto& h : horizons) {
    if (!h.predicted || !h.ground_truth) {
      throw Error(ErrorKind::MissingHorizon, "no frame pair for horizon " + horizon_label(h.offset));
    }
    HorizonReport hr;
    hr.offset = h.offset;
    const Rect frame{0, 0, h.ground_truth->width, h.ground_truth->height};
    for (const auto& [vehicle, box] : h.boxes) {
      const Rect r = box.to_rect().intersect(frame);
      if (r.empty()) continue;
      const CropPair pair{crop(*h.ground_truth, r), crop(*h.predicted, r), box, vehicle, h.offset};
      hr.crops.push_back({vehicle, box, mse(pair), ssim(pair, k)});
    }
    if (hr.crops.empty()) {
      hr.notes.push_back("no ground-truth vehicle inside the frame");
    } else {
      for (const auto& c : hr.crops) {
        hr.mse += c.mse;
        hr.ssim += c.ssim;
      }
      hr.mse /= double(hr.crops.size());
      hr.ssim /= double(hr.crops.size());
    }
    const auto& f = h.features;
    if (f.target_features && f.predicted_features) {
      hr.fid = fid(feature_stats(*f.target_features), feature_stats(*f.predicted_features));
    } else {
      hr.notes.push_back("FID skipped: feature files missing");
    }
    if (f.predicted_probabilities) {
      hr.inception = inception_score(*f.predicted_probabilities, inception_splits).mean;
    } else {
      hr.notes.push_back("IS skipped: probability file missing");
    }
    report.horizons.push_back(std::move(hr));
  }
  return report;
}

std::string horizon_label(double offset) {
  std::ostringstream os;
  os << '+' << std::fixed << std::setprecision(1) << offset << 's';
  return os.str();
}

std::string format_table(const ClipReport& report) {
  std::ostringstream os;
  os << std::left << std::setw(8) << "metric";
  for (const auto& h : report.horizons) os << std::right << std::setw(12) << horizon_label(h.offset);
  os << '\n';
  auto row = [&](const char* name, auto&& cell) {
    os << std::left << std::setw(8) << name;
    for (const auto& h : report.horizons) os << std::right << std::setw(12) << cell(h);
    os << '\n';
  };
  row("MSE", [](const HorizonReport& h) { return h.crops.empty() ? std::string("n/a") : fixed(h.mse); });
  row("SSIM", [](const HorizonReport& h) { return h.crops.empty() ? std::string("n/a") : fixed(h.ssim); });
  row("FID", [](const HorizonReport& h) { return h.fid ? fixed(*h.fid) : std::string("skipped"); });
  row("IS", [](const HorizonReport& h) { return h.inception ? fixed(*h.inception) : std::string("skipped"); });
  return os.str();
}

std::string format_key_values(const ClipReport& report) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (const auto& h : report.horizons) {
    const std::string label = horizon_label(h.offset);
    os << "crops@" << label << '=' << h.crops.size() << '\n';
    if (!h.crops.empty()) {
      os << "mse@" << label << '=' << h.mse << '\n';
      os << "ssim@" << label << '=' << h.ssim << '\n';
    }
    os << "fid@" << label << '=';
    if (h.fid) os << *h.fid; else os << "skipped";
    os << '\n' << "is@" << label << '=';
    if (h.inception) os << *h.inception; else os << "skipped";
    os << '\n';
  }
  return os.str();
}

}  // namespace urbanfuture
