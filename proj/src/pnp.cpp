#include "radpose/pnp.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "radpose/errors.h"

namespace radpose {

Correspondences Correspondences::unweighted(std::vector<Vec3> model, std::vector<Vec2> image) {
    Correspondences c;
    c.weights.assign(model.size(), 1.0);
    c.model_pts = std::move(model);
    c.image_pts = std::move(image);
    return c;
}

void Correspondences::validate() const {
    if (model_pts.size() != image_pts.size() || model_pts.size() != weights.size()) {
        throw DomainError("correspondence arrays differ in length");
    }
    if (model_pts.size() < 4) {
        throw DomainError("ePnP needs at least 4 correspondences");
    }
    for (std::size_t i = 0; i < model_pts.size(); ++i) {
        if (!model_pts[i].allFinite() || !image_pts[i].allFinite() || !std::isfinite(weights[i])) {
            throw DomainError("correspondence values must be finite");
        }
        if (weights[i] < 0.0 || weights[i] > 1.0) {
            throw DomainError("correspondence weights must lie in [0, 1]");
        }
    }
}

// ---------------------------------------------------------------- Horn

Pose horn_align(const std::vector<Vec3>& src, const std::vector<Vec3>& dst, const std::vector<double>& weights) {
    const std::size_t n = src.size();
    if (dst.size() != n || (!weights.empty() && weights.size() != n)) {
        throw DomainError("alignment inputs differ in length");
    }
    if (n < 3) {
        throw DegeneracyError("absolute orientation needs at least 3 points");
    }
    auto w = [&](std::size_t i) { return weights.empty() ? 1.0 : weights[i]; };
    double wsum = 0.0;
    Vec3 mu_s = Vec3::Zero(), mu_d = Vec3::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        wsum += w(i);
        mu_s += w(i) * src[i];
        mu_d += w(i) * dst[i];
    }
    if (!(wsum > 0.0)) {
        throw DegeneracyError("alignment weights sum to zero");
    }
    mu_s /= wsum;
    mu_d /= wsum;

    Mat3 cov_s = Mat3::Zero();
    Mat3 cross = Mat3::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 a = src[i] - mu_s;
        cov_s += w(i) * a * a.transpose();
        cross += w(i) * a * (dst[i] - mu_d).transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Mat3> eig(cov_s);
    const Vec3 ev = eig.eigenvalues();  // ascending
    if (!(ev[2] > 0.0) || ev[1] <= 1e-12 * ev[2]) {
        throw DegeneracyError("source points are collinear");
    }

    const Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Mat3 u = svd.matrixU();
    const Mat3 v = svd.matrixV();
    Mat3 d = Mat3::Identity();
    d(2, 2) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;

    Pose pose;
    pose.rotation = v * d * u.transpose();
    pose.translation = mu_d - pose.rotation * mu_s;
    return pose;
}

double alignment_objective(const Pose& pose, const std::vector<Vec3>& src, const std::vector<Vec3>& dst,
                           const std::vector<double>& weights) {
    double sum = 0.0;
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        sum += w * (apply(pose, src[i]) - dst[i]).squaredNorm();
    }
    return sum;
}

// ---------------------------------------------------------------- ePnP

namespace {

struct ControlFrame {
    std::vector<Vec3> points;       // control points, model frame
    Eigen::MatrixXd alphas;         // n x K barycentric coordinates
};

ControlFrame choose_control_points(const std::vector<Vec3>& pts) {
    const std::size_t n = pts.size();
    Vec3 c0 = Vec3::Zero();
    for (const auto& p : pts) {
        c0 += p;
    }
    c0 /= static_cast<double>(n);
    Mat3 cov = Mat3::Zero();
    for (const auto& p : pts) {
        cov += (p - c0) * (p - c0).transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    const Vec3 lambda = eig.eigenvalues();  // ascending
    const Mat3 axes = eig.eigenvectors();
    if (!(lambda[2] > 0.0) || lambda[1] <= 1e-12 * lambda[2]) {
        throw DegeneracyError("model points are collinear");
    }
    const bool planar = lambda[0] <= 1e-10 * lambda[2];

    ControlFrame frame;
    frame.points.push_back(c0);
    const int axis_count = planar ? 2 : 3;
    for (int a = 0; a < axis_count; ++a) {
        const int col = 2 - a;
        frame.points.push_back(c0 + std::sqrt(lambda[col] / static_cast<double>(n)) * axes.col(col));
    }
    const int k = static_cast<int>(frame.points.size());

    // Solve p - c0 = sum_j alpha_j (c_j - c0) for j >= 1.
    Eigen::MatrixXd basis(3, k - 1);
    for (int j = 1; j < k; ++j) {
        basis.col(j - 1) = frame.points[static_cast<std::size_t>(j)] - c0;
    }
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(basis);
    frame.alphas.resize(static_cast<Eigen::Index>(n), k);
    for (std::size_t i = 0; i < n; ++i) {
        const Eigen::VectorXd a = qr.solve(Eigen::VectorXd(pts[i] - c0));
        frame.alphas(static_cast<Eigen::Index>(i), 0) = 1.0 - a.sum();
        frame.alphas.row(static_cast<Eigen::Index>(i)).tail(k - 1) = a.transpose();
    }
    return frame;
}

struct PairTable {
    std::vector<std::pair<int, int>> pairs;
    Eigen::VectorXd rho;  // squared control-point distances
};

PairTable control_pairs(const std::vector<Vec3>& cps) {
    PairTable t;
    const int k = static_cast<int>(cps.size());
    for (int a = 0; a < k; ++a) {
        for (int b = a + 1; b < k; ++b) {
            t.pairs.emplace_back(a, b);
        }
    }
    t.rho.resize(static_cast<Eigen::Index>(t.pairs.size()));
    for (std::size_t p = 0; p < t.pairs.size(); ++p) {
        t.rho[static_cast<Eigen::Index>(p)] =
            (cps[static_cast<std::size_t>(t.pairs[p].first)] - cps[static_cast<std::size_t>(t.pairs[p].second)]).squaredNorm();
    }
    return t;
}

// Difference of control points a and b inside null vector v (3K entries).
Vec3 block_diff(const Eigen::VectorXd& v, int a, int b) {
    return v.segment<3>(3 * a) - v.segment<3>(3 * b);
}

// Rows: pairs. Columns: products beta_k beta_l (k <= l) in the order of `terms`.
Eigen::MatrixXd distance_system(const std::vector<Eigen::VectorXd>& null_vecs, const PairTable& t,
                                const std::vector<std::pair<int, int>>& terms) {
    Eigen::MatrixXd l(static_cast<Eigen::Index>(t.pairs.size()), static_cast<Eigen::Index>(terms.size()));
    for (std::size_t p = 0; p < t.pairs.size(); ++p) {
        for (std::size_t c = 0; c < terms.size(); ++c) {
            const auto [kk, ll] = terms[c];
            const Vec3 dk = block_diff(null_vecs[static_cast<std::size_t>(kk)], t.pairs[p].first, t.pairs[p].second);
            const Vec3 dl = block_diff(null_vecs[static_cast<std::size_t>(ll)], t.pairs[p].first, t.pairs[p].second);
            l(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(c)) = (kk == ll ? 1.0 : 2.0) * dk.dot(dl);
        }
    }
    return l;
}

Eigen::VectorXd least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
    return a.completeOrthogonalDecomposition().solve(b);
}

void gauss_newton(const std::vector<Eigen::VectorXd>& null_vecs, const PairTable& t, Eigen::VectorXd& betas,
                  int iterations) {
    const Eigen::Index nb = betas.size();
    const Eigen::Index np = static_cast<Eigen::Index>(t.pairs.size());
    for (int it = 0; it < iterations; ++it) {
        Eigen::MatrixXd jac(np, nb);
        Eigen::VectorXd res(np);
        for (Eigen::Index p = 0; p < np; ++p) {
            const auto [a, b] = t.pairs[static_cast<std::size_t>(p)];
            Vec3 d = Vec3::Zero();
            for (Eigen::Index k = 0; k < nb; ++k) {
                d += betas[k] * block_diff(null_vecs[static_cast<std::size_t>(k)], a, b);
            }
            res[p] = t.rho[p] - d.squaredNorm();
            for (Eigen::Index k = 0; k < nb; ++k) {
                jac(p, k) = 2.0 * d.dot(block_diff(null_vecs[static_cast<std::size_t>(k)], a, b));
            }
        }
        const Eigen::VectorXd step = least_squares(jac, res);
        if (!step.allFinite()) {
            break;
        }
        betas += step;
    }
}

double weighted_rmse(const Pose& pose, const Correspondences& c, const CameraIntrinsics& k) {
    double sum = 0.0, wsum = 0.0;
    for (std::size_t i = 0; i < c.model_pts.size(); ++i) {
        if (c.weights[i] <= 0.0) {
            continue;
        }
        const Vec3 p = apply(pose, c.model_pts[i]);
        if (!(p.z() > 0.0)) {
            return std::numeric_limits<double>::infinity();
        }
        sum += c.weights[i] * (project(p, k) - c.image_pts[i]).squaredNorm();
        wsum += c.weights[i];
    }
    return std::sqrt(sum / wsum);
}

}  // namespace

PnpResult epnp(const Correspondences& input, const CameraIntrinsics& k) {
    input.validate();
    if (!(k.fx > 0.0) || !(k.fy > 0.0)) {
        throw DomainError("focal lengths must be positive");
    }
    Correspondences c;
    for (std::size_t i = 0; i < input.model_pts.size(); ++i) {
        if (input.weights[i] > 0.0) {
            c.model_pts.push_back(input.model_pts[i]);
            c.image_pts.push_back(input.image_pts[i]);
            c.weights.push_back(input.weights[i]);
        }
    }
    if (c.model_pts.size() < 4) {
        throw DomainError("ePnP needs at least 4 correspondences with positive weight");
    }
    const std::size_t n = c.model_pts.size();
    const ControlFrame frame = choose_control_points(c.model_pts);
    const int ncp = static_cast<int>(frame.points.size());

    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(2 * n), 3 * ncp);
    for (std::size_t i = 0; i < n; ++i) {
        const double w = c.weights[i];
        const double u = c.image_pts[i].x();
        const double v = c.image_pts[i].y();
        const Eigen::Index r = static_cast<Eigen::Index>(2 * i);
        for (int j = 0; j < ncp; ++j) {
            const double a = frame.alphas(static_cast<Eigen::Index>(i), j);
            m(r, 3 * j) = w * a * k.fx;
            m(r, 3 * j + 2) = w * a * (k.cx - u);
            m(r + 1, 3 * j + 1) = w * a * k.fy;
            m(r + 1, 3 * j + 2) = w * a * (k.cy - v);
        }
    }
    const Eigen::MatrixXd mtm = m.transpose() * m;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(mtm);
    const PairTable table = control_pairs(frame.points);
    const int max_null = ncp == 4 ? 4 : 2;
    std::vector<Eigen::VectorXd> null_vecs;
    for (int i = 0; i < std::min(4, 3 * ncp); ++i) {
        null_vecs.push_back(eig.eigenvectors().col(i));
    }
    const int gn_betas = ncp == 4 ? 4 : 3;

    PnpResult best;
    best.reprojection_rmse = std::numeric_limits<double>::infinity();
    bool have = false;

    for (int dim = 1; dim <= max_null; ++dim) {
        Eigen::VectorXd betas = Eigen::VectorXd::Zero(gn_betas);
        if (dim == 1) {
            double num = 0.0, den = 0.0;
            for (std::size_t p = 0; p < table.pairs.size(); ++p) {
                const Vec3 d = block_diff(null_vecs[0], table.pairs[p].first, table.pairs[p].second);
                num += d.norm() * std::sqrt(table.rho[static_cast<Eigen::Index>(p)]);
                den += d.squaredNorm();
            }
            betas[0] = num / den;
        } else if (dim == 2) {
            const Eigen::VectorXd b = least_squares(distance_system(null_vecs, table, {{0, 0}, {0, 1}, {1, 1}}), table.rho);
            if (b[0] < 0.0) {
                betas[0] = std::sqrt(-b[0]);
                betas[1] = b[2] < 0.0 ? std::sqrt(-b[2]) : 0.0;
            } else {
                betas[0] = std::sqrt(b[0]);
                betas[1] = b[2] > 0.0 ? std::sqrt(b[2]) : 0.0;
            }
            if (b[1] < 0.0) {
                betas[0] = -betas[0];
            }
        } else if (dim == 3) {
            const Eigen::VectorXd b =
                least_squares(distance_system(null_vecs, table, {{0, 0}, {0, 1}, {1, 1}, {0, 2}, {1, 2}}), table.rho);
            if (b[0] < 0.0) {
                betas[0] = std::sqrt(-b[0]);
                betas[1] = b[2] < 0.0 ? std::sqrt(-b[2]) : 0.0;
            } else {
                betas[0] = std::sqrt(b[0]);
                betas[1] = b[2] > 0.0 ? std::sqrt(b[2]) : 0.0;
            }
            if (b[1] < 0.0) {
                betas[0] = -betas[0];
            }
            betas[2] = betas[0] != 0.0 ? b[3] / betas[0] : 0.0;
        } else {
            const Eigen::VectorXd b =
                least_squares(distance_system(null_vecs, table, {{0, 0}, {0, 1}, {0, 2}, {0, 3}}), table.rho);
            const double s = b[0] < 0.0 ? -1.0 : 1.0;
            betas[0] = std::sqrt(std::abs(b[0]));
            for (int j = 1; j < 4; ++j) {
                betas[j] = betas[0] != 0.0 ? s * b[j] / betas[0] : 0.0;
            }
        }
        gauss_newton(null_vecs, table, betas, 10);
        if (!betas.allFinite()) {
            continue;
        }

        Eigen::VectorXd x = Eigen::VectorXd::Zero(3 * ncp);
        for (Eigen::Index j = 0; j < betas.size(); ++j) {
            x += betas[j] * null_vecs[static_cast<std::size_t>(j)];
        }
        std::vector<Vec3> cam(n);
        double mean_z = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            cam[i] = Vec3::Zero();
            for (int j = 0; j < ncp; ++j) {
                cam[i] += frame.alphas(static_cast<Eigen::Index>(i), j) * x.segment<3>(3 * j);
            }
            mean_z += cam[i].z();
        }
        if (mean_z < 0.0) {
            for (auto& p : cam) {
                p = -p;
            }
        }
        Pose pose;
        try {
            pose = horn_align(c.model_pts, cam, c.weights);
        } catch (const DegeneracyError&) {
            continue;
        }
        const double rmse = weighted_rmse(pose, c, k);
        if (!have || rmse < best.reprojection_rmse) {
            best.pose = pose;
            best.reprojection_rmse = rmse;
            best.null_dim = dim;
            have = true;
        }
    }
    if (!have || !std::isfinite(best.reprojection_rmse)) {
        throw DegeneracyError("ePnP found no pose with all points in front of the camera");
    }
    return best;
}

// ---------------------------------------------------------------- ICP

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    // Region tests on the triangle's Voronoi regions.
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0.0 && d2 <= 0.0) {
        return a;
    }
    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0.0 && d4 <= d3) {
        return b;
    }
    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
        return a + (d1 / (d1 - d3)) * ab;
    }
    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0.0 && d5 <= d6) {
        return c;
    }
    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
        return a + (d2 / (d2 - d6)) * ac;
    }
    const double va = d3 * d6 - d5 * d4;
    if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
        return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
    }
    const double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

SurfaceIndex::SurfaceIndex(const MeshModel& mesh, double cell_size) : mesh_(&mesh), cell_(cell_size) {
    if (!(cell_size > 0.0)) {
        throw DomainError("cell size must be positive");
    }
    if (mesh.faces.empty()) {
        throw DomainError("surface index needs a mesh with faces");
    }
    lo_ = hi_ = mesh.vertices[static_cast<std::size_t>(mesh.faces.front()[0])];
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const auto& face = mesh.faces[f];
        Vec3 flo = mesh.vertices[static_cast<std::size_t>(face[0])], fhi = flo;
        for (int idx : face) {
            flo = flo.cwiseMin(mesh.vertices[static_cast<std::size_t>(idx)]);
            fhi = fhi.cwiseMax(mesh.vertices[static_cast<std::size_t>(idx)]);
        }
        lo_ = lo_.cwiseMin(flo);
        hi_ = hi_.cwiseMax(fhi);
        const Key a = key_of(flo), b = key_of(fhi);
        for (int x = a.x; x <= b.x; ++x) {
            for (int y = a.y; y <= b.y; ++y) {
                for (int z = a.z; z <= b.z; ++z) {
                    cells_.push_back({Key{x, y, z}, static_cast<int>(f)});
                }
            }
        }
    }
    std::sort(cells_.begin(), cells_.end(), [](const auto& l, const auto& r) {
        if (l.first < r.first || r.first < l.first) {
            return l.first < r.first;
        }
        return l.second < r.second;
    });
}

SurfaceIndex::Key SurfaceIndex::key_of(const Vec3& p) const {
    return {static_cast<int>(std::floor(p.x() / cell_)), static_cast<int>(std::floor(p.y() / cell_)),
            static_cast<int>(std::floor(p.z() / cell_))};
}

Vec3 SurfaceIndex::closest_brute_force(const Vec3& p) const {
    Vec3 best = Vec3::Zero();
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& f : mesh_->faces) {
        const Vec3 q = closest_point_on_triangle(p, mesh_->vertices[static_cast<std::size_t>(f[0])],
                                                 mesh_->vertices[static_cast<std::size_t>(f[1])],
                                                 mesh_->vertices[static_cast<std::size_t>(f[2])]);
        const double d = (q - p).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = q;
        }
    }
    return best;
}

Vec3 SurfaceIndex::closest(const Vec3& p) const {
    // Far from the mesh the ring search degenerates; scan everything instead.
    const Vec3 outside = (lo_ - p).cwiseMax(p - hi_).cwiseMax(Vec3::Zero());
    if (outside.norm() > 3.0 * cell_) {
        return closest_brute_force(p);
    }
    const Key center = key_of(p);
    const Key klo = key_of(lo_), khi = key_of(hi_);
    const int max_ring = std::max({std::abs(center.x - klo.x), std::abs(center.x - khi.x), std::abs(center.y - klo.y),
                                   std::abs(center.y - khi.y), std::abs(center.z - klo.z), std::abs(center.z - khi.z)});
    Vec3 best = Vec3::Zero();
    double best_d = std::numeric_limits<double>::infinity();
    for (int ring = 0; ring <= max_ring; ++ring) {
        for (int x = center.x - ring; x <= center.x + ring; ++x) {
            for (int y = center.y - ring; y <= center.y + ring; ++y) {
                for (int z = center.z - ring; z <= center.z + ring; ++z) {
                    if (std::max({std::abs(x - center.x), std::abs(y - center.y), std::abs(z - center.z)}) != ring) {
                        continue;
                    }
                    const Key key{x, y, z};
                    auto it = std::lower_bound(cells_.begin(), cells_.end(), key,
                                               [](const auto& e, const Key& k) { return e.first < k; });
                    for (; it != cells_.end() && !(key < it->first); ++it) {
                        const auto& f = mesh_->faces[static_cast<std::size_t>(it->second)];
                        const Vec3 q = closest_point_on_triangle(p, mesh_->vertices[static_cast<std::size_t>(f[0])],
                                                                 mesh_->vertices[static_cast<std::size_t>(f[1])],
                                                                 mesh_->vertices[static_cast<std::size_t>(f[2])]);
                        const double d = (q - p).squaredNorm();
                        if (d < best_d) {
                            best_d = d;
                            best = q;
                        }
                    }
                }
            }
        }
        // Cells beyond this ring are at least ring * cell away from p.
        if (best_d <= (ring * cell_) * (ring * cell_)) {
            break;
        }
    }
    return best;
}

IcpResult icp_refine(const Pose& pose0, const MeshModel& mesh, const DepthMap& depth, const InstanceMask& mask,
                     const CameraIntrinsics& k, const IcpOptions& options) {
    if (!depth.same_shape(mask)) {
        throw DomainError("depth and mask shapes differ");
    }
    IcpResult result;
    result.pose = pose0;

    std::vector<Vec3> scene;
    for (int v = 0; v < depth.height; ++v) {
        for (int u = 0; u < depth.width; ++u) {
            if (mask.at(u, v) > 0 && depth.at(u, v) > 0.0f) {
                scene.push_back(backproject(Vec2(u, v), depth.at(u, v), k));
            }
        }
    }
    if (static_cast<int>(scene.size()) < options.min_points || mesh.faces.empty()) {
        result.skipped = true;
        return result;
    }
    const SurfaceIndex index(mesh, options.cell_size);
    std::vector<Vec3> matched(scene.size());
    std::vector<Vec3> trial(scene.size());

    auto match = [&](const Pose& pose, std::vector<Vec3>& out) {
        const Pose inv = invert(pose);
        double sum = 0.0;
        for (std::size_t i = 0; i < scene.size(); ++i) {
            const Vec3 q = apply(inv, scene[i]);
            out[i] = index.closest(q);
            sum += (q - out[i]).squaredNorm();
        }
        return sum / static_cast<double>(scene.size());
    };

    // Pose parameters relative to pose0: rotation vector and translation.
    using Vec6 = Eigen::Matrix<double, 6, 1>;
    auto to_params = [&](const Pose& p) {
        const Eigen::AngleAxisd aa(p.rotation * pose0.rotation.transpose());
        Vec6 x;
        x << aa.angle() * aa.axis(), p.translation;
        return x;
    };
    auto from_params = [&](const Vec6& x) {
        Pose p;
        const double angle = x.head<3>().norm();
        const Mat3 r = angle > 0.0 ? Eigen::AngleAxisd(angle, x.head<3>() / angle).toRotationMatrix() : Mat3::Identity();
        p.rotation = r * pose0.rotation;
        p.translation = x.tail<3>();
        return p;
    };

    Pose current = pose0;
    double objective = match(current, matched);
    result.initial_objective = objective;
    result.objective_trace.push_back(objective);
    // Anderson acceleration history: fixed-point residuals g(x) - x and the
    // corresponding g(x).
    std::vector<Vec6> residuals, images;
    for (int it = 0; it < options.max_iters; ++it) {
        Pose next;
        try {
            next = horn_align(matched, scene);
        } catch (const DegeneracyError&) {
            break;
        }
        double next_objective = match(next, trial);
        ++result.iterations;
        if (next_objective > objective) {
            // Cannot happen in exact arithmetic; keep the better pose.
            break;
        }
        matched.swap(trial);

        const Vec6 g = to_params(next);
        residuals.push_back(g - to_params(current));
        images.push_back(g);
        if (static_cast<int>(residuals.size()) > options.anderson_depth + 1) {
            residuals.erase(residuals.begin());
            images.erase(images.begin());
        }
        if (residuals.size() >= 2) {
            const int m = static_cast<int>(residuals.size()) - 1;
            Eigen::Matrix<double, 6, Eigen::Dynamic> df(6, m), dg(6, m);
            for (int j = 0; j < m; ++j) {
                df.col(j) = residuals[j + 1] - residuals[j];
                dg.col(j) = images[j + 1] - images[j];
            }
            const Eigen::VectorXd gamma = df.completeOrthogonalDecomposition().solve(residuals.back());
            const Vec6 xa = g - dg * gamma;
            if (xa.allFinite()) {
                const Pose candidate = from_params(xa);
                const double f = match(candidate, trial);
                if (f < next_objective) {
                    next = candidate;
                    next_objective = f;
                    matched.swap(trial);
                }
            }
        }

        const double rot_step = rotation_angle_between(current.rotation, next.rotation);
        const double trans_step = (next.translation - current.translation).norm();
        current = next;
        objective = next_objective;
        result.objective_trace.push_back(objective);
        if (rot_step < options.tol && trans_step < options.tol) {
            break;
        }
    }
    result.pose = current;
    result.final_objective = objective;
    return result;
}

}  // namespace radpose
