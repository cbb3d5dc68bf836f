#include "pwni/field_kernel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>
#include <vector>

namespace pwni {
namespace {

// Below this k^2 the elliptic combinations are evaluated from their series to
// avoid cancellation.
constexpr double kSeriesM = 1.0e-2;

// (1 - m/2) K - E = (pi m^2 / 32) * series
double potential_series(double m) {
    return 1.0 + m * (3.0 / 4 + m * (75.0 / 128 + m * (245.0 / 512 + m * (6615.0 / 16384 +
                                                                            m * 22869.0 / 65536))));
}

// -(1 - m) K + (1 - m/2) E = (3 pi m^2 / 32) * series
double radial_series(double m) {
    return 1.0 + m * (1.0 / 4 + m * (15.0 / 128 + m * (35.0 / 512 + m * (735.0 / 16384 +
                                                                          m * 2079.0 / 65536))));
}

struct LoopTerms {
    double a_phi;
    double br;
    double bz;
};

// All three kernels of a unit filament, sharing K and E.
LoopTerms loop_terms(double a, double zs, double r, double z, bool want_field) {
    const double dz = z - zs;
    const double sum = a + r;
    const double diff = a - r;
    const double alpha2 = sum * sum + dz * dz;
    const double beta2 = diff * diff + dz * dz;
    if (beta2 == 0.0) {
        throw SelfTermError();
    }
    const double alpha = std::sqrt(alpha2);
    const double m = 4.0 * a * r / alpha2;
    const double kp2 = beta2 / alpha2;

    LoopTerms out{0.0, 0.0, 0.0};
    if (m < kSeriesM) {
        out.a_phi = kMu0 * a * a * r * potential_series(m) / (4.0 * alpha2 * alpha);
        if (want_field) {
            out.br = kMu0 * dz * 3.0 * a * a * r * radial_series(m) /
                     (4.0 * alpha2 * alpha2 * alpha * kp2);
            const double k = std::sqrt(m);
            const double K = std::comp_ellint_1(k);
            const double E = std::comp_ellint_2(k);
            out.bz = kMu0 / (2.0 * kPi * alpha) * (K + (a * a - r * r - dz * dz) / beta2 * E);
        }
        return out;
    }
    const double k = std::sqrt(m);
    const double K = std::comp_ellint_1(k);
    const double E = std::comp_ellint_2(k);
    out.a_phi = kMu0 / (kPi * k) * std::sqrt(a / r) * ((1.0 - 0.5 * m) * K - E);
    if (want_field) {
        out.br = kMu0 * dz / (2.0 * kPi * alpha * r) * (-K + (a * a + r * r + dz * dz) / beta2 * E);
        out.bz = kMu0 / (2.0 * kPi * alpha) * (K + (a * a - r * r - dz * dz) / beta2 * E);
    }
    return out;
}

double rect_f(double x, double y) {
    x = std::abs(x);
    y = std::abs(y);
    const double x2 = x * x;
    const double y2 = y * y;
    double f = -25.0 / 48.0 * x2 * y2;
    const double rho2 = x2 + y2;
    if (rho2 > 0.0) {
        f += (x2 * y2 / 8.0 - x2 * x2 / 48.0 - y2 * y2 / 48.0) * std::log(rho2);
    }
    if (x > 0.0 && y > 0.0) {
        f += (x2 * x * y * std::atan(y / x) + x * y2 * y * std::atan(x / y)) / 6.0;
    }
    return f;
}

// Gauss-Legendre nodes on [-1, 1].
constexpr std::array<double, 4> kG4x{-0.8611363115940526, -0.3399810435848563,
                                     0.3399810435848563, 0.8611363115940526};
constexpr std::array<double, 4> kG4w{0.3478548451374538, 0.6521451548625461,
                                     0.6521451548625461, 0.3478548451374538};
constexpr double kG2 = 0.5773502691896258;

struct ElementGeom {
    double r, z, dz;
};

}  // namespace

double loop_potential(double r_src, double z_src, double r_obs, double z_obs) {
    if (r_obs <= 0.0) {
        return 0.0;
    }
    return loop_terms(r_src, z_src, r_obs, z_obs, false).a_phi;
}

LoopField loop_field(double r_src, double z_src, double r_obs, double z_obs) {
    if (r_obs <= 0.0) {
        const double dz = z_obs - z_src;
        const double s2 = r_src * r_src + dz * dz;
        return {0.0, kMu0 * r_src * r_src / (2.0 * s2 * std::sqrt(s2))};
    }
    const LoopTerms t = loop_terms(r_src, z_src, r_obs, z_obs, true);
    return {t.br, t.bz};
}

double loop_mutual(double r1, double z1, double r2, double z2) {
    if (r1 > r2 || (r1 == r2 && z1 > z2)) {
        std::swap(r1, r2);
        std::swap(z1, z2);
    }
    return 2.0 * kPi * r2 * loop_terms(r1, z1, r2, z2, false).a_phi;
}

double rect_log_gmd(const Rect& a, const Rect& b) {
    // Normalize by the largest dimension so the quartic terms stay well scaled.
    const double s = std::max({a.r1 - a.r0, a.z1 - a.z0, b.r1 - b.r0, b.z1 - b.z0});
    const std::array<double, 4> xs{(a.r1 - b.r0) / s, (a.r0 - b.r0) / s, (a.r1 - b.r1) / s,
                                   (a.r0 - b.r1) / s};
    const std::array<double, 4> ys{(a.z1 - b.z0) / s, (a.z0 - b.z0) / s, (a.z1 - b.z1) / s,
                                   (a.z0 - b.z1) / s};
    constexpr std::array<double, 4> sign{1.0, -1.0, -1.0, 1.0};
    double acc = 0.0;
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            acc += sign[i] * sign[j] * rect_f(xs[i], ys[j]);
        }
    }
    const double area = (a.r1 - a.r0) * (a.z1 - a.z0) * (b.r1 - b.r0) * (b.z1 - b.z0) /
                        (s * s * s * s);
    return acc / area + std::log(s);
}

double kernel_memory_estimate(std::size_t n_elements, int field_points) {
    const double n = static_cast<double>(n_elements);
    return (1.0 + 2.0 * field_points) * n * n * sizeof(double);
}

namespace {

void parallel_rows(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) {
            body(i);
        }
        return;
    }
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < n; i += threads) {
                body(i);
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
}

Rect element_rect(const ElementGeom& e, double thickness) {
    return {e.r - 0.5 * thickness, e.r + 0.5 * thickness, e.z - 0.5 * e.dz, e.z + 0.5 * e.dz};
}

}  // namespace

KernelSet assemble_kernels(const TapeMesh& mesh, const KernelOptions& opts) {
    if (opts.field_points != 1 && opts.field_points != 2) {
        throw SpecError("field_points must be 1 or 2");
    }
    const std::size_t n = mesh.n_elements();
    if (kernel_memory_estimate(n, opts.field_points) > opts.memory_cap_bytes) {
        throw KernelMemoryError("reduce elements or enable multi-scale");
    }
    const double d = mesh.tape_thickness;
    std::vector<ElementGeom> el(n);
    for (std::size_t i = 0; i < n; ++i) {
        el[i] = {mesh.elem_r[i], mesh.elem_z[i], mesh.elem_dz[i]};
    }

    KernelSet ks;
    ks.field_points = opts.field_points;
    ks.mesh_hash = mesh.hash();
    const auto ni = static_cast<Eigen::Index>(n);
    const Eigen::Index nf = ni * opts.field_points;
    ks.a_map.resize(ni, ni);
    ks.br_map.resize(nf, ni);
    ks.bz_map.resize(nf, ni);
    ks.self_regularization.resize(ni);
    ks.center_bz.resize(ni);

    for (std::size_t i = 0; i < n; ++i) {
        const Rect rc = element_rect(el[i], d);
        ks.self_regularization[static_cast<Eigen::Index>(i)] = std::exp(rect_log_gmd(rc, rc));
    }

    auto is_near = [&](std::size_t i, std::size_t j) {
        const double size = std::max({el[i].dz, el[j].dz, d});
        return std::hypot(el[i].r - el[j].r, el[i].z - el[j].z) < opts.near_factor * size;
    };

    // Mutual inductances of element rings, filled for j >= i and mirrored so
    // the stored matrix is exactly symmetric.
    parallel_rows(n, opts.threads, [&](std::size_t i) {
        const auto ii = static_cast<Eigen::Index>(i);
        for (std::size_t j = i; j < n; ++j) {
            double m = 0.0;
            if (i == j) {
                const double g = ks.self_regularization[ii];
                m = loop_mutual(el[i].r, el[i].z - 0.5 * g, el[i].r, el[i].z + 0.5 * g);
            } else if (is_near(i, j)) {
                const double g = std::exp(rect_log_gmd(element_rect(el[i], d), element_rect(el[j], d)));
                const double dr = el[j].r - el[i].r;
                const double dzc = el[j].z - el[i].z;
                const double dist = std::hypot(dr, dzc);
                const double rm = 0.5 * (el[i].r + el[j].r);
                const double zm = 0.5 * (el[i].z + el[j].z);
                const double ur = dr / dist;
                const double uz = dzc / dist;
                m = loop_mutual(rm - 0.5 * g * ur, zm - 0.5 * g * uz, rm + 0.5 * g * ur,
                                zm + 0.5 * g * uz);
            } else {
                m = loop_mutual(el[i].r, el[i].z, el[j].r, el[j].z);
            }
            ks.a_map(ii, static_cast<Eigen::Index>(j)) = m;
        }
    });
    for (Eigen::Index i = 0; i < ni; ++i) {
        for (Eigen::Index j = 0; j < i; ++j) {
            ks.a_map(i, j) = ks.a_map(j, i);
        }
    }
    for (Eigen::Index i = 0; i < ni; ++i) {
        ks.a_map.row(i) /= 2.0 * kPi * el[static_cast<std::size_t>(i)].r;
    }

    // Field maps. Rows are observation points.
    const int fp = opts.field_points;
    parallel_rows(n, opts.threads, [&](std::size_t i) {
        for (int q = 0; q < fp; ++q) {
            const double zo = fp == 1 ? el[i].z : el[i].z + (q == 0 ? -1.0 : 1.0) * kG2 * 0.5 * el[i].dz;
            const Eigen::Index row = static_cast<Eigen::Index>(i) * fp + q;
            for (std::size_t j = 0; j < n; ++j) {
                const auto col = static_cast<Eigen::Index>(j);
                LoopField b;
                if (i == j) {
                    const double g = ks.self_regularization[col];
                    b.bz = loop_field(el[j].r, el[j].z, el[i].r, el[j].z + g).bz;
                    if (fp == 2) {
                        // Normal component of a uniform sheet at a point inside it.
                        const double z0 = el[j].z - 0.5 * el[j].dz;
                        const double z1 = el[j].z + 0.5 * el[j].dz;
                        b.br = kMu0 / (2.0 * kPi * el[j].dz) * std::log((zo - z0) / (z1 - zo));
                    }
                } else if (is_near(i, j)) {
                    for (int a = 0; a < 4; ++a) {
                        for (int c = 0; c < 4; ++c) {
                            const double rs = el[j].r + 0.5 * d * kG4x[a];
                            const double zs = el[j].z + 0.5 * el[j].dz * kG4x[c];
                            const LoopField f = loop_field(rs, zs, el[i].r, zo);
                            const double w = 0.25 * kG4w[a] * kG4w[c];
                            b.br += w * f.br;
                            b.bz += w * f.bz;
                        }
                    }
                } else {
                    b = loop_field(el[j].r, el[j].z, el[i].r, zo);
                }
                ks.br_map(row, col) = b.br;
                ks.bz_map(row, col) = b.bz;
            }
        }
    });

    // Axial field at the coil center: closed form for a thin sheet on a loop.
    double z_center = 0.0;
    if (!mesh.strips.empty()) {
        z_center = 0.5 * (mesh.strips.front().z.front() + mesh.strips.front().z.back());
    }
    for (std::size_t j = 0; j < n; ++j) {
        const double a = el[j].r;
        const double u0 = el[j].z - 0.5 * el[j].dz - z_center;
        const double u1 = el[j].z + 0.5 * el[j].dz - z_center;
        ks.center_bz[static_cast<Eigen::Index>(j)] =
            kMu0 / (2.0 * el[j].dz) * (u1 / std::hypot(a, u1) - u0 / std::hypot(a, u0));
    }
    return ks;
}

Eigen::VectorXd uniform_current_weights(const TapeMesh& mesh) {
    Eigen::VectorXd c(static_cast<Eigen::Index>(mesh.n_elements()));
    for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
        const Strip& s = mesh.strips[static_cast<std::size_t>(mesh.elem_strip[e])];
        c[static_cast<Eigen::Index>(e)] = mesh.elem_dz[e] / s.width() / mesh.n_parallel;
    }
    return c;
}

double effective_inductance(const TapeMesh& mesh, const KernelSet& kernels) {
    const Eigen::VectorXd c = uniform_current_weights(mesh);
    Eigen::VectorXd circ(c.size());
    for (Eigen::Index i = 0; i < c.size(); ++i) {
        circ[i] = 2.0 * kPi * mesh.elem_r[static_cast<std::size_t>(i)] * c[i];
    }
    return circ.dot(kernels.a_map * c);
}

double effective_inductance(const TapeMesh& mesh) {
    return effective_inductance(mesh, assemble_kernels(mesh));
}

namespace {

constexpr char kCacheMagic[8] = {'P', 'W', 'N', 'I', 'K', 'R', 'N', 'L'};
constexpr std::uint32_t kCacheVersion = 1;

void write_matrix(std::ofstream& out, const Eigen::MatrixXd& m) {
    const std::int64_t rows = m.rows();
    const std::int64_t cols = m.cols();
    out.write(reinterpret_cast<const char*>(&rows), sizeof rows);
    out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    out.write(reinterpret_cast<const char*>(rm.data()),
              static_cast<std::streamsize>(rm.size() * sizeof(double)));
}

bool read_matrix(std::ifstream& in, Eigen::MatrixXd& m) {
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    in.read(reinterpret_cast<char*>(&rows), sizeof rows);
    in.read(reinterpret_cast<char*>(&cols), sizeof cols);
    if (!in || rows < 0 || cols < 0) {
        return false;
    }
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
    in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double)));
    if (!in) {
        return false;
    }
    m = rm;
    return true;
}

}  // namespace

void save_kernel_cache(const std::filesystem::path& path, const KernelSet& kernels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write kernel cache " + path.string());
    }
    out.write(kCacheMagic, sizeof kCacheMagic);
    out.write(reinterpret_cast<const char*>(&kCacheVersion), sizeof kCacheVersion);
    const auto fp = static_cast<std::uint32_t>(kernels.field_points);
    out.write(reinterpret_cast<const char*>(&kernels.mesh_hash), sizeof kernels.mesh_hash);
    out.write(reinterpret_cast<const char*>(&fp), sizeof fp);
    write_matrix(out, kernels.a_map);
    write_matrix(out, kernels.br_map);
    write_matrix(out, kernels.bz_map);
    write_matrix(out, kernels.self_regularization);
    write_matrix(out, kernels.center_bz);
}

std::optional<KernelSet> load_kernel_cache(const std::filesystem::path& path,
                                           std::uint64_t mesh_hash, int field_points) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        return std::nullopt;
    }
    char magic[8];
    std::uint32_t version = 0;
    std::uint64_t hash = 0;
    std::uint32_t fp = 0;
    in.read(magic, sizeof magic);
    in.read(reinterpret_cast<char*>(&version), sizeof version);
    in.read(reinterpret_cast<char*>(&hash), sizeof hash);
    in.read(reinterpret_cast<char*>(&fp), sizeof fp);
    if (!in || std::memcmp(magic, kCacheMagic, sizeof magic) != 0 || version != kCacheVersion ||
        hash != mesh_hash || static_cast<int>(fp) != field_points) {
        return std::nullopt;
    }
    KernelSet ks;
    ks.mesh_hash = hash;
    ks.field_points = field_points;
    Eigen::MatrixXd self;
    Eigen::MatrixXd center;
    if (!read_matrix(in, ks.a_map) || !read_matrix(in, ks.br_map) || !read_matrix(in, ks.bz_map) ||
        !read_matrix(in, self) || !read_matrix(in, center)) {
        return std::nullopt;
    }
    ks.self_regularization = self.col(0);
    ks.center_bz = center.col(0);
    return ks;
}

KernelSet cached_kernels(const TapeMesh& mesh, const KernelOptions& opts) {
    const char* dir = std::getenv("PWNI_KERNEL_CACHE");
    if (dir == nullptr || *dir == '\0') {
        return assemble_kernels(mesh, opts);
    }
    std::ostringstream name;
    name << "kernels_" << std::hex << mesh.hash() << "_q" << opts.field_points << ".bin";
    const std::filesystem::path path = std::filesystem::path(dir) / name.str();
    if (auto hit = load_kernel_cache(path, mesh.hash(), opts.field_points)) {
        return std::move(*hit);
    }
    KernelSet ks = assemble_kernels(mesh, opts);
    std::filesystem::create_directories(dir);
    save_kernel_cache(path, ks);
    return ks;
}

}  // namespace pwni
