#include "ganedit/metrics.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace ganedit {

double semantic_relevance(const ImageTensor& image, const TextPrompt& prompt,
                          const SemanticModel& semantic) {
  const Vec vi = semantic.embed_image(image);
  const Vec vt = semantic.embed_text(prompt);
  const double denom = vi.norm() * vt.norm();
  return std::clamp(vi.dot(vt) / denom, -1.0, 1.0);
}

std::optional<double> pose_iou(const ImageTensor& original, const ImageTensor& edited,
                               const PoseParser& pose, const MetricOptions& options) {
  if (original.side() != edited.side()) {
    throw ShapeError("pose IoU images must share one side length");
  }
  const BodyPartMaskSet a = pose.parse(original);
  const BodyPartMaskSet b = pose.parse(edited);
  double sum = 0.0;
  int counted = 0;
  for (int j = 0; j < a.part_count(); ++j) {
    long inter = 0;
    long uni = 0;
    for (Eigen::Index p = 0; p < a.masks.cols(); ++p) {
      const bool in_a = a.masks(j, p) >= options.iou_threshold;
      const bool in_b = b.masks(j, p) >= options.iou_threshold;
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
    if (uni == 0) {
      continue;  // part absent in both; skipped
    }
    sum += static_cast<double>(inter) / static_cast<double>(uni);
    ++counted;
  }
  if (counted == 0) {
    return std::nullopt;
  }
  return sum / counted;
}

std::optional<double> identity_similarity(const ImageTensor& original,
                                          const ImageTensor& edited,
                                          const FaceEmbedder& face) {
  if (original.side() != edited.side()) {
    throw ShapeError("identity similarity images must share one side length");
  }
  const auto ea = face.embed(original);
  const auto eb = face.embed(edited);
  if (!ea || !eb) {
    return std::nullopt;
  }
  const double denom = ea->norm() * eb->norm();
  return std::clamp(ea->dot(*eb) / denom, -1.0, 1.0);
}

namespace {

struct GaussianFit {
  Vec mean;
  Mat cov;  // unbiased (1 / (N - 1))
};

GaussianFit fit_gaussian(const Mat& samples) {
  const Eigen::Index n = samples.rows();
  GaussianFit fit;
  fit.mean = samples.colwise().mean().transpose();
  const Mat centered = samples.rowwise() - fit.mean.transpose();
  fit.cov = centered.transpose() * centered / static_cast<double>(n - 1);
  return fit;
}

// Principal square root of a symmetric PSD matrix; negative eigenvalues are
// clamped to zero.
Mat psd_sqrt(const Mat& sym) {
  Eigen::SelfAdjointEigenSolver<Mat> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw RangeError("eigendecomposition failed in FID");
  }
  Vec roots = solver.eigenvalues();
  for (Eigen::Index i = 0; i < roots.size(); ++i) {
    roots[i] = roots[i] > 0.0 ? std::sqrt(roots[i]) : 0.0;
  }
  return solver.eigenvectors() * roots.asDiagonal() * solver.eigenvectors().transpose();
}

}  // namespace

double fid_from_embeddings(const Mat& a, const Mat& b, double eps) {
  if (a.rows() < 2 || b.rows() < 2) {
    throw ValidationError("FID needs at least 2 samples per set");
  }
  if (a.cols() != b.cols()) {
    throw ShapeError("FID embedding dimensions differ");
  }
  const Eigen::Index d = a.cols();
  GaussianFit fa = fit_gaussian(a);
  GaussianFit fb = fit_gaussian(b);
  fa.cov += eps * Mat::Identity(d, d);
  fb.cov += eps * Mat::Identity(d, d);

  // tr((Sa Sb)^{1/2}) via the symmetric product sqrt(Sa)^T Sb sqrt(Sa).
  const Mat root_a = psd_sqrt(fa.cov);
  Mat product = root_a * fb.cov * root_a;
  product = 0.5 * (product + product.transpose().eval());
  Eigen::SelfAdjointEigenSolver<Mat> solver(product);
  if (solver.info() != Eigen::Success) {
    throw RangeError("eigendecomposition failed in FID");
  }
  double trace_root = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double ev = solver.eigenvalues()[i];
    trace_root += ev > 0.0 ? std::sqrt(ev) : 0.0;
  }

  const double mean_term = (fa.mean - fb.mean).squaredNorm();
  const double value = mean_term + fa.cov.trace() + fb.cov.trace() - 2.0 * trace_root;
  return std::max(0.0, value);
}

double fid(const std::vector<ImageTensor>& set_a, const std::vector<ImageTensor>& set_b,
           const ImageEmbedder& embedder, double eps) {
  if (set_a.size() < 2 || set_b.size() < 2) {
    throw ValidationError("FID needs at least 2 images per set");
  }
  const int d = embedder.embed_dim();
  Mat ea(static_cast<Eigen::Index>(set_a.size()), d);
  Mat eb(static_cast<Eigen::Index>(set_b.size()), d);
  for (std::size_t i = 0; i < set_a.size(); ++i) {
    ea.row(static_cast<Eigen::Index>(i)) = embedder.embed_image(set_a[i]).transpose();
  }
  for (std::size_t i = 0; i < set_b.size(); ++i) {
    eb.row(static_cast<Eigen::Index>(i)) = embedder.embed_image(set_b[i]).transpose();
  }
  return fid_from_embeddings(ea, eb, eps);
}

namespace {

void accumulate(MetricMean& m, double value) {
  m.mean += value;
  ++m.count;
}

void finalize(MetricMean& m) {
  if (m.count > 0) {
    m.mean /= m.count;
  }
}

}  // namespace

AggregateSummary aggregate(const std::vector<PromptGroup>& groups) {
  if (groups.empty()) {
    throw ValidationError("aggregate needs at least one prompt group");
  }
  AggregateSummary out;
  for (const PromptGroup& group : groups) {
    PromptSummary ps;
    ps.prompt_id = group.prompt_id;
    double iou_sum = 0.0;
    double id_sum = 0.0;
    int iou_n = 0;
    int id_n = 0;
    double sem_sum = 0.0;
    for (const MetricReport& r : group.reports) {
      ps.semantic.push_back(r.semantic);
      accumulate(out.semantic, r.semantic);
      sem_sum += r.semantic;
      if (r.iou) {
        ps.iou.push_back(*r.iou);
        accumulate(out.iou, *r.iou);
        iou_sum += *r.iou;
        ++iou_n;
      } else {
        ++out.iou.skipped;
      }
      if (r.identity) {
        ps.identity.push_back(*r.identity);
        accumulate(out.identity, *r.identity);
        id_sum += *r.identity;
        ++id_n;
      } else {
        ++out.identity.skipped;
      }
    }
    if (!group.reports.empty()) {
      ps.semantic_mean = sem_sum / static_cast<double>(group.reports.size());
    }
    if (iou_n > 0) ps.iou_mean = iou_sum / iou_n;
    if (id_n > 0) ps.identity_mean = id_sum / id_n;
    ps.fid = group.fid;
    if (group.fid) {
      accumulate(out.fid, *group.fid);
    } else {
      ++out.fid.skipped;
    }
    out.per_prompt.push_back(std::move(ps));
  }
  finalize(out.semantic);
  finalize(out.iou);
  finalize(out.identity);
  finalize(out.fid);
  return out;
}

}  // namespace ganedit
