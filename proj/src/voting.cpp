#include "radpose/voting.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <thread>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "radpose/errors.h"

namespace radpose {

std::array<int, 3> VoteGrid::voxel_of(const Vec3& p) const {
    const Vec3 rel = (p - origin) / voxel_size;
    return {static_cast<int>(std::lround(rel.x())), static_cast<int>(std::lround(rel.y())),
            static_cast<int>(std::lround(rel.z()))};
}

double VoteGrid::total() const { return std::accumulate(counts.begin(), counts.end(), 0.0); }

void KeypointSet::sort_by_class_and_score() {
    std::stable_sort(entries.begin(), entries.end(), [](const KeypointEntry& a, const KeypointEntry& b) {
        if (a.class_id != b.class_id) {
            return a.class_id < b.class_id;
        }
        return a.score > b.score;
    });
}

RadialMapStack invert_radial_map(const RadialMapStack& radial, double v_min, double v_max) {
    if (!(v_max > v_min)) {
        throw DomainError("inverse radial normalization needs v_max > v_min");
    }
    const double span = v_max - v_min;
    RadialMapStack out = radial;
    for (auto& map : out.maps) {
        for (auto& v : map.data) {
            if (v == kRadialBackground) {
                continue;
            }
            const double clamped = std::clamp(static_cast<double>(v), v_min, v_max);
            v = static_cast<float>((v_max - clamped) / span);
        }
    }
    return out;
}

namespace {

struct Voter {
    Vec3 center;
    double radius;
};

std::vector<Voter> collect_voters(const Image<float>& radial, const DepthMap& depth, const CameraIntrinsics& k,
                                  const Image<int>* filter) {
    if (!radial.same_shape(depth) || (filter && !filter->same_shape(depth))) {
        throw DomainError("radial map, depth and filter must be aligned");
    }
    std::vector<Voter> voters;
    for (int v = 0; v < depth.height; ++v) {
        for (int u = 0; u < depth.width; ++u) {
            const float r = radial.at(u, v);
            const float d = depth.at(u, v);
            if (!(r >= 0.0f) || !(d > 0.0f) || (filter && filter->at(u, v) <= 0)) {
                continue;
            }
            voters.push_back({backproject(Vec2(u, v), d, k), static_cast<double>(r)});
        }
    }
    return voters;
}

VoteGrid fit_grid(const std::vector<Voter>& voters, const GridSpec& spec) {
    if (!(spec.voxel_size > 0.0)) {
        throw DomainError("voxel size must be positive");
    }
    VoteGrid grid;
    grid.voxel_size = spec.voxel_size;
    if (spec.origin && spec.dims) {
        grid.origin = *spec.origin;
        grid.dims = *spec.dims;
        if (grid.dims[0] < 0 || grid.dims[1] < 0 || grid.dims[2] < 0) {
            throw DomainError("grid dimensions must be non-negative");
        }
    } else if (!voters.empty()) {
        Vec3 lo = voters.front().center, hi = voters.front().center;
        double rmax = 0.0;
        for (const auto& v : voters) {
            lo = lo.cwiseMin(v.center);
            hi = hi.cwiseMax(v.center);
            rmax = std::max(rmax, v.radius);
        }
        const double pad = rmax + spec.voxel_size;
        grid.origin = lo - Vec3::Constant(pad);
        for (int a = 0; a < 3; ++a) {
            const double cells = std::ceil((hi[a] + pad - grid.origin[a]) / spec.voxel_size) + 1.0;
            if (cells * 1.0 > static_cast<double>(spec.max_voxels)) {
                throw CapacityError("vote grid exceeds the voxel budget");
            }
            grid.dims[a] = static_cast<int>(cells);
        }
    }
    const double n = static_cast<double>(grid.dims[0]) * grid.dims[1] * grid.dims[2];
    if (n > static_cast<double>(spec.max_voxels)) {
        throw CapacityError("vote grid of " + std::to_string(static_cast<long long>(n)) +
                            " voxels exceeds the budget of " + std::to_string(spec.max_voxels));
    }
    return grid;
}

// Adds one vote to every voxel in the spherical shell of one voter.
void accumulate_shell(const VoteGrid& grid, const Voter& voter, std::vector<double>& counts) {
    const double s = grid.voxel_size;
    const double h = 0.5 * s;
    const double r_out = voter.radius + h;
    const double r_in = std::max(voter.radius - h, 0.0);
    const Vec3 c = voter.center;
    const Vec3& o = grid.origin;

    auto index_range = [&](double lo, double hi, int axis, int& first, int& last) {
        // A hair of slack keeps boundary voxels; membership is re-tested
        // exactly below.
        first = std::max(0, static_cast<int>(std::ceil((lo - o[axis]) / s - 1e-6)));
        last = std::min(grid.dims[axis] - 1, static_cast<int>(std::floor((hi - o[axis]) / s + 1e-6)));
    };
    // Squared bounds with a little margin reject most voxels without a sqrt;
    // the final decision always uses the exact test.
    const double reject_hi = r_out * r_out * (1.0 + 1e-9);
    const double reject_lo = r_in * r_in * (1.0 - 1e-9);
    auto in_shell = [&](double d2) {
        if (d2 > reject_hi || d2 < reject_lo) {
            return false;
        }
        return std::abs(std::sqrt(d2) - voter.radius) <= h;
    };

    const double r_pad = r_out * (1.0 + 1e-9);
    int i0, i1;
    index_range(c.x() - r_pad, c.x() + r_pad, 0, i0, i1);
    for (int i = i0; i <= i1; ++i) {
        const double dx = o.x() + i * s - c.x();
        const double dx2 = dx * dx;
        if (dx2 > reject_hi) {
            continue;
        }
        const double ry = std::sqrt(reject_hi - dx2);
        int j0, j1;
        index_range(c.y() - ry, c.y() + ry, 1, j0, j1);
        for (int j = j0; j <= j1; ++j) {
            const double dy = o.y() + j * s - c.y();
            const double rho2 = dx2 + dy * dy;
            if (rho2 > reject_hi) {
                continue;
            }
            const double z_hi = std::sqrt(reject_hi - rho2);
            const double z_lo2 = reject_lo - rho2;
            auto scan = [&](double lo, double hi) {
                int k0, k1;
                index_range(c.z() + lo, c.z() + hi, 2, k0, k1);
                for (int k = k0; k <= k1; ++k) {
                    const double dz = o.z() + k * s - c.z();
                    if (in_shell(rho2 + dz * dz)) {
                        counts[grid.linear_index(i, j, k)] += 1.0;
                    }
                }
            };
            if (z_lo2 <= 0.0) {
                scan(-z_hi, z_hi);
            } else {
                const double z_lo = std::sqrt(z_lo2);
                // The two caps could share a voxel only at the equator.
                if (z_lo < 1e-3 * s) {
                    scan(-z_hi, z_hi);
                } else {
                    scan(-z_hi, -z_lo);
                    scan(z_lo, z_hi);
                }
            }
        }
    }
}

}  // namespace

VoteGrid vote_radial_map(const Image<float>& radial, const DepthMap& depth, const CameraIntrinsics& k,
                         const GridSpec& spec, const Image<int>* pixel_filter) {
    const std::vector<Voter> voters = collect_voters(radial, depth, k, pixel_filter);
    VoteGrid grid = fit_grid(voters, spec);
    grid.voters = voters.size();
    grid.counts.assign(grid.voxel_count(), 0.0);
    if (voters.empty() || grid.counts.empty()) {
        return grid;
    }
    const int threads = std::max(1, std::min<int>(spec.threads, static_cast<int>(voters.size())));
    if (threads == 1) {
        for (const auto& v : voters) {
            accumulate_shell(grid, v, grid.counts);
        }
        return grid;
    }
    std::vector<std::vector<double>> partial(static_cast<std::size_t>(threads));
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            auto& local = partial[static_cast<std::size_t>(t)];
            local.assign(grid.voxel_count(), 0.0);
            for (std::size_t i = static_cast<std::size_t>(t); i < voters.size(); i += static_cast<std::size_t>(threads)) {
                accumulate_shell(grid, voters[i], local);
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
    for (const auto& local : partial) {
        for (std::size_t i = 0; i < local.size(); ++i) {
            grid.counts[i] += local[i];
        }
    }
    return grid;
}

std::vector<VoteGrid> vote_radial(const RadialMapStack& radial, const DepthMap& depth, const CameraIntrinsics& k,
                                  const GridSpec& spec, const Image<int>* pixel_filter) {
    std::vector<VoteGrid> grids;
    grids.reserve(radial.size());
    for (const auto& map : radial.maps) {
        grids.push_back(vote_radial_map(map, depth, k, spec, pixel_filter));
    }
    return grids;
}

namespace {

Peak refine_peak(const VoteGrid& grid, int pi, int pj, int pk) {
    Peak peak;
    peak.voxel = {pi, pj, pk};
    peak.count = grid.counts[grid.linear_index(pi, pj, pk)];
    Vec3 weighted = Vec3::Zero();
    double mass = 0.0;
    for (int k = std::max(0, pk - 1); k <= std::min(grid.dims[2] - 1, pk + 1); ++k) {
        for (int j = std::max(0, pj - 1); j <= std::min(grid.dims[1] - 1, pj + 1); ++j) {
            for (int i = std::max(0, pi - 1); i <= std::min(grid.dims[0] - 1, pi + 1); ++i) {
                const double w = grid.counts[grid.linear_index(i, j, k)];
                weighted += w * grid.center(i, j, k);
                mass += w;
            }
        }
    }
    peak.kp3d = weighted / mass;
    peak.score = grid.voters > 0 ? std::clamp(peak.count / static_cast<double>(grid.voters), 0.0, 1.0) : 0.0;
    return peak;
}

std::array<int, 3> unravel(const VoteGrid& grid, std::size_t idx) {
    const int i = static_cast<int>(idx % static_cast<std::size_t>(grid.dims[0]));
    const std::size_t rest = idx / static_cast<std::size_t>(grid.dims[0]);
    const int j = static_cast<int>(rest % static_cast<std::size_t>(grid.dims[1]));
    const int k = static_cast<int>(rest / static_cast<std::size_t>(grid.dims[1]));
    return {i, j, k};
}

}  // namespace

std::optional<Peak> extract_peak(const VoteGrid& grid) {
    if (grid.counts.empty()) {
        return std::nullopt;
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < grid.counts.size(); ++i) {
        if (grid.counts[i] > grid.counts[best]) {
            best = i;
        }
    }
    if (!(grid.counts[best] > 0.0)) {
        return std::nullopt;
    }
    const auto [i, j, k] = unravel(grid, best);
    return refine_peak(grid, i, j, k);
}

std::vector<Peak> extract_peaks(const VoteGrid& grid, int max_peaks, double min_separation,
                                double min_relative_count) {
    std::vector<Peak> out;
    const auto top = extract_peak(grid);
    if (!top || max_peaks <= 0) {
        return out;
    }
    out.push_back(*top);
    if (max_peaks == 1) {
        return out;
    }
    const double threshold = min_relative_count * top->count;
    std::vector<std::size_t> candidates;
    for (std::size_t idx = 0; idx < grid.counts.size(); ++idx) {
        const double c = grid.counts[idx];
        if (c < threshold || c <= 0.0) {
            continue;
        }
        const auto [i, j, k] = unravel(grid, idx);
        bool is_max = true;
        for (int dk = -1; dk <= 1 && is_max; ++dk) {
            for (int dj = -1; dj <= 1 && is_max; ++dj) {
                for (int di = -1; di <= 1 && is_max; ++di) {
                    const int a = i + di, b = j + dj, e = k + dk;
                    if (a < 0 || b < 0 || e < 0 || a >= grid.dims[0] || b >= grid.dims[1] || e >= grid.dims[2]) {
                        continue;
                    }
                    is_max = grid.counts[grid.linear_index(a, b, e)] <= c;
                }
            }
        }
        if (is_max) {
            candidates.push_back(idx);
        }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](std::size_t a, std::size_t b) { return grid.counts[a] > grid.counts[b]; });
    for (std::size_t idx : candidates) {
        if (static_cast<int>(out.size()) >= max_peaks) {
            break;
        }
        const auto [i, j, k] = unravel(grid, idx);
        const Vec3 c = grid.center(i, j, k);
        const bool separated = std::all_of(out.begin(), out.end(), [&](const Peak& p) {
            return (grid.center(p.voxel[0], p.voxel[1], p.voxel[2]) - c).norm() >= min_separation;
        });
        if (separated) {
            out.push_back(refine_peak(grid, i, j, k));
        }
    }
    return out;
}

Vec3 refine_keypoint(const Image<float>& radial, const DepthMap& depth, const CameraIntrinsics& k, const Vec3& x0,
                     const RefineOptions& options, const Image<int>* pixel_filter) {
    const std::vector<Voter> voters = collect_voters(radial, depth, k, pixel_filter);
    Vec3 x = x0;
    for (int it = 0; it < options.max_iters; ++it) {
        Mat3 jtj = Mat3::Zero();
        Vec3 jtr = Vec3::Zero();
        int used = 0;
        for (const auto& v : voters) {
            const Vec3 d = x - v.center;
            const double dist = d.norm();
            const double res = dist - v.radius;
            if (std::abs(res) > options.band || dist < 1e-12) {
                continue;
            }
            const Vec3 j = d / dist;
            jtj += j * j.transpose();
            jtr += j * res;
            ++used;
        }
        if (used < 4) {
            return x0;
        }
        Eigen::SelfAdjointEigenSolver<Mat3> eig(jtj);
        if (!(eig.eigenvalues()(0) > 1e-9 * eig.eigenvalues()(2))) {
            return x0;
        }
        const Vec3 step = -jtj.ldlt().solve(jtr);
        x += step;
        if (!x.allFinite() || (x - x0).norm() > options.band) {
            return x0;
        }
        if (step.norm() < 1e-9) {
            break;
        }
    }
    return x;
}

std::vector<InstanceGroup> group_instances(const KeypointSet& candidates,
                                           const std::vector<std::vector<Vec3>>& model_keypoints,
                                           const GroupingOptions& options) {
    std::vector<InstanceGroup> groups;
    std::set<int> classes;
    for (const auto& e : candidates.entries) {
        if (e.class_id > 0) {
            classes.insert(e.class_id);
        }
    }
    const int min_assigned = std::max(2, options.min_keypoints);

    for (int cls : classes) {
        if (cls >= static_cast<int>(model_keypoints.size())) {
            continue;
        }
        const auto& model = model_keypoints[static_cast<std::size_t>(cls)];
        const int n = static_cast<int>(model.size());
        if (n < min_assigned) {
            continue;
        }
        // Candidate indices into `candidates.entries`, per keypoint index.
        std::vector<std::vector<std::size_t>> slots(static_cast<std::size_t>(n));
        for (std::size_t i = 0; i < candidates.entries.size(); ++i) {
            const auto& e = candidates.entries[i];
            if (e.class_id == cls && e.keypoint_index >= 0 && e.keypoint_index < n) {
                slots[static_cast<std::size_t>(e.keypoint_index)].push_back(i);
            }
        }
        for (auto& slot : slots) {
            std::stable_sort(slot.begin(), slot.end(), [&](std::size_t a, std::size_t b) {
                return candidates.entries[a].score > candidates.entries[b].score;
            });
            if (static_cast<int>(slot.size()) > options.max_candidates_per_index) {
                slot.resize(static_cast<std::size_t>(options.max_candidates_per_index));
            }
        }

        struct Assignment {
            std::vector<long> pick;  // -1 = unassigned
            int assigned = 0;
            double discrepancy = 0.0;
        };
        std::vector<Assignment> assignments;
        std::vector<long> pick(static_cast<std::size_t>(n), -1);
        std::function<void(int)> enumerate = [&](int idx) {
            if (idx == n) {
                Assignment a;
                a.pick = pick;
                double sum = 0.0;
                int pairs = 0;
                for (int p = 0; p < n; ++p) {
                    if (pick[static_cast<std::size_t>(p)] < 0) {
                        continue;
                    }
                    ++a.assigned;
                    for (int q = p + 1; q < n; ++q) {
                        if (pick[static_cast<std::size_t>(q)] < 0) {
                            continue;
                        }
                        const Vec3& kp = candidates.entries[static_cast<std::size_t>(pick[static_cast<std::size_t>(p)])].kp3d;
                        const Vec3& kq = candidates.entries[static_cast<std::size_t>(pick[static_cast<std::size_t>(q)])].kp3d;
                        sum += std::abs((kp - kq).norm() - (model[static_cast<std::size_t>(p)] - model[static_cast<std::size_t>(q)]).norm());
                        ++pairs;
                    }
                }
                if (a.assigned >= min_assigned) {
                    a.discrepancy = sum / pairs;
                    assignments.push_back(std::move(a));
                }
                return;
            }
            enumerate(idx + 1);
            for (std::size_t c : slots[static_cast<std::size_t>(idx)]) {
                pick[static_cast<std::size_t>(idx)] = static_cast<long>(c);
                enumerate(idx + 1);
            }
            pick[static_cast<std::size_t>(idx)] = -1;
        };
        enumerate(0);

        // Within the tolerance, larger assignments rank first; a mean over
        // fewer pairs is otherwise favored by noise alone.
        const double tol = options.discrepancy_tolerance;
        std::stable_sort(assignments.begin(), assignments.end(), [tol](const Assignment& a, const Assignment& b) {
            const bool a_ok = a.discrepancy <= tol;
            const bool b_ok = b.discrepancy <= tol;
            if (a_ok != b_ok) {
                return a_ok;
            }
            if (a_ok && a.assigned != b.assigned) {
                return a.assigned > b.assigned;
            }
            if (a.discrepancy != b.discrepancy) {
                return a.discrepancy < b.discrepancy;
            }
            return a.assigned > b.assigned;
        });
        std::set<long> used;
        for (const auto& a : assignments) {
            const bool free = std::none_of(a.pick.begin(), a.pick.end(), [&](long p) { return p >= 0 && used.count(p); });
            if (!free) {
                continue;
            }
            InstanceGroup g;
            g.class_id = cls;
            g.discrepancy = a.discrepancy;
            for (long p : a.pick) {
                if (p >= 0) {
                    used.insert(p);
                    g.keypoints.entries.push_back(candidates.entries[static_cast<std::size_t>(p)]);
                }
            }
            g.keypoints.sort_by_class_and_score();
            groups.push_back(std::move(g));
        }
    }
    return groups;
}

namespace {

bool in_free_space(const KeypointEntry& e, const DepthMap& depth, double margin) {
    if (e.kp3d.z() <= 0.0) {
        return false;
    }
    const long u = std::lround(e.kp2d.x()), v = std::lround(e.kp2d.y());
    if (u < 0 || v < 0 || u >= depth.width || v >= depth.height) {
        return false;
    }
    const double d = depth.at(static_cast<int>(u), static_cast<int>(v));
    if (d > 0.0) {
        return e.kp3d.z() < d - margin;
    }
    // A surface point projects onto some foreground pixel; allow for the
    // silhouette edge.
    constexpr int kEdge = 2;
    for (long y = std::max(0L, v - kEdge); y <= std::min<long>(depth.height - 1, v + kEdge); ++y) {
        for (long x = std::max(0L, u - kEdge); x <= std::min<long>(depth.width - 1, u + kEdge); ++x) {
            if (depth.at(static_cast<int>(x), static_cast<int>(y)) > 0.0f) {
                return false;
            }
        }
    }
    return true;
}

}  // namespace

KeypointSet detect_keypoints(const RadialMapStack& radial, const DepthMap& depth, const Image<int>& class_raster,
                             const CameraIntrinsics& k, const DetectionOptions& options) {
    if (!class_raster.same_shape(depth)) {
        throw DomainError("class raster and depth must be aligned");
    }
    std::set<int> classes;
    for (int c : class_raster.data) {
        if (c > 0) {
            classes.insert(c);
        }
    }
    KeypointSet out;
    for (int cls : classes) {
        Image<int> filter(class_raster.width, class_raster.height, 0);
        for (std::size_t i = 0; i < filter.size(); ++i) {
            filter.data[i] = class_raster.data[i] == cls ? 1 : 0;
        }
        for (std::size_t j = 0; j < radial.size(); ++j) {
            const VoteGrid grid = vote_radial_map(radial.maps[j], depth, k, options.grid, &filter);
            const int wanted = std::max(1, options.max_instances_per_class);
            const bool screen = options.free_space_margin > 0.0;
            std::vector<KeypointEntry> kept, rejected;
            for (const auto& peak :
                 extract_peaks(grid, wanted + (screen ? std::max(0, options.spare_peaks) : 0), options.peak_separation)) {
                KeypointEntry e;
                e.kp3d = options.refine.enabled
                             ? refine_keypoint(radial.maps[j], depth, k, peak.kp3d, options.refine, &filter)
                             : peak.kp3d;
                e.kp2d = e.kp3d.z() > 0.0 ? project(e.kp3d, k) : Vec2(-1.0, -1.0);
                e.class_id = cls;
                e.score = peak.score;
                e.keypoint_index = static_cast<int>(j);
                (screen && in_free_space(e, depth, options.free_space_margin) ? rejected : kept).push_back(e);
            }
            // Everything rejected: keep the ranking rather than lose the keypoint.
            std::vector<KeypointEntry>& chosen = kept.empty() ? rejected : kept;
            chosen.resize(std::min(chosen.size(), static_cast<std::size_t>(wanted)));
            out.entries.insert(out.entries.end(), chosen.begin(), chosen.end());
        }
    }
    out.sort_by_class_and_score();
    return out;
}

}  // namespace radpose
