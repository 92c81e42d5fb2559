#include "featuredex/descriptor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "featuredex/errors.hpp"
#include "featuredex/io_util.hpp"

namespace featuredex {

namespace {

const Vec3 kCubeCenter{kCubeSide / 2, kCubeSide / 2, kCubeSide / 2};

double off_diagonal(const double a[3][3]) {
    return std::sqrt(a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2]);
}

}  // namespace

void eigen_symmetric3(const double mat[3][3], double eigenvalues[3],
                      double eigenvectors[3][3]) {
    double a[3][3];
    double v[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) a[i][j] = mat[i][j];

    double scale = 0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) scale = std::max(scale, std::abs(a[i][j]));

    for (int sweep = 0; sweep < 64 && off_diagonal(a) > 1e-15 * std::max(scale, 1e-300);
         ++sweep) {
        static const int pairs[3][2] = {{0, 1}, {0, 2}, {1, 2}};
        for (const int* pq : pairs) {
            int p = pq[0], q = pq[1];
            double apq = a[p][q];
            if (std::abs(apq) <= 1e-300) continue;
            double theta = (a[q][q] - a[p][p]) / (2 * apq);
            double t = (theta >= 0 ? 1.0 : -1.0) /
                       (std::abs(theta) + std::sqrt(theta * theta + 1));
            double c = 1 / std::sqrt(t * t + 1);
            double s = t * c;

            double app = a[p][p], aqq = a[q][q];
            a[p][p] = c * c * app - 2 * s * c * apq + s * s * aqq;
            a[q][q] = s * s * app + 2 * s * c * apq + c * c * aqq;
            a[p][q] = a[q][p] = 0;
            int r = 3 - p - q;
            double arp = a[r][p], arq = a[r][q];
            a[r][p] = a[p][r] = c * arp - s * arq;
            a[r][q] = a[q][r] = s * arp + c * arq;
            for (int i = 0; i < 3; ++i) {
                double vip = v[i][p], viq = v[i][q];
                v[i][p] = c * vip - s * viq;
                v[i][q] = s * vip + c * viq;
            }
        }
    }

    int order[3] = {0, 1, 2};
    std::stable_sort(order, order + 3, [&](int x, int y) { return a[x][x] > a[y][y]; });
    for (int i = 0; i < 3; ++i) {
        eigenvalues[i] = a[order[i]][order[i]];
        for (int j = 0; j < 3; ++j) eigenvectors[i][j] = v[j][order[i]];
    }
}

namespace {

// 10 covariance shape features of a neighborhood, plus its smallest
// eigenvector; all-zero when the neighborhood is degenerate.
struct EigBlock {
    std::array<double, 10> features{};
    Vec3 normal{};
};

EigBlock eigen_block(const PointCloud& cloud, const std::vector<uint32_t>& neighbors) {
    EigBlock out;
    size_t m = neighbors.size();
    if (m < 3) return out;

    Vec3 mean{};
    for (uint32_t j : neighbors) mean = mean + cloud.points[j];
    mean = mean * (1.0 / double(m));

    double c[3][3] = {};
    for (uint32_t j : neighbors) {
        Vec3 d = cloud.points[j] - mean;
        double dd[3] = {d.x, d.y, d.z};
        for (int r = 0; r < 3; ++r)
            for (int s = 0; s < 3; ++s) c[r][s] += dd[r] * dd[s];
    }
    for (int r = 0; r < 3; ++r)
        for (int s = 0; s < 3; ++s) c[r][s] /= double(m);

    double lam[3], vec[3][3];
    eigen_symmetric3(c, lam, vec);
    for (double& l : lam) l = std::max(l, 0.0);
    double sum = lam[0] + lam[1] + lam[2];
    if (sum < 1e-30) return out;

    double l1 = lam[0] / sum, l2 = lam[1] / sum, l3 = lam[2] / sum;
    double entropy = 0;
    for (double l : {l1, l2, l3})
        if (l > 0) entropy -= l * std::log(l);

    out.features = {l1,
                    l2,
                    l3,
                    (l1 - l2) / l1,
                    (l2 - l3) / l1,
                    l3 / l1,
                    std::cbrt(l1 * l2 * l3),
                    (l1 - l3) / l1,
                    entropy,
                    l3};
    out.normal = {vec[2][0], vec[2][1], vec[2][2]};
    return out;
}

}  // namespace

FeatureMatrix compute_descriptors(const PointCloud& cloud, const DescriptorConfig& cfg) {
    if (cloud.empty()) throw Error(Err::Empty, "cannot describe an empty cloud");
    if (!(cfg.radius > 0)) throw Error(Err::InvalidParams, "descriptor radius must be positive");

    const size_t n = cloud.size();
    const double cell = cfg.radius;

    std::map<std::array<int64_t, 3>, std::vector<uint32_t>> grid;
    auto cell_of = [cell](const Vec3& p) {
        return std::array<int64_t, 3>{static_cast<int64_t>(std::floor(p.x / cell)),
                                      static_cast<int64_t>(std::floor(p.y / cell)),
                                      static_cast<int64_t>(std::floor(p.z / cell))};
    };
    for (size_t i = 0; i < n; ++i) grid[cell_of(cloud.points[i])].push_back(uint32_t(i));

    std::vector<uint32_t> neighbors;
    auto gather = [&](const Vec3& p, double rho, std::vector<uint32_t>& out) {
        out.clear();
        const double r2 = rho * rho;
        std::array<int64_t, 3> lo, hi;
        const double coords[3] = {p.x, p.y, p.z};
        for (int axis = 0; axis < 3; ++axis) {
            lo[axis] = static_cast<int64_t>(std::floor((coords[axis] - rho) / cell));
            hi[axis] = static_cast<int64_t>(std::floor((coords[axis] + rho) / cell));
        }
        for (int64_t cx = lo[0]; cx <= hi[0]; ++cx)
            for (int64_t cy = lo[1]; cy <= hi[1]; ++cy)
                for (int64_t cz = lo[2]; cz <= hi[2]; ++cz) {
                    auto it = grid.find({cx, cy, cz});
                    if (it == grid.end()) continue;
                    for (uint32_t j : it->second) {
                        Vec3 d = cloud.points[j] - p;
                        if (d.dot(d) <= r2) out.push_back(j);
                    }
                }
        std::sort(out.begin(), out.end());
    };

    FeatureMatrix fm;
    fm.rows = static_cast<uint32_t>(n);
    fm.cols = kDescriptorDims;
    fm.positions.resize(n * 3);
    fm.values.assign(n * size_t(kDescriptorDims), 0.0f);

    for (size_t i = 0; i < n; ++i) {
        const Vec3& p = cloud.points[i];
        fm.positions[i * 3 + 0] = static_cast<float>(p.x);
        fm.positions[i * 3 + 1] = static_cast<float>(p.y);
        fm.positions[i * 3 + 2] = static_cast<float>(p.z);

        float* row = fm.values.data() + i * kDescriptorDims;

        gather(p, cfg.radius, neighbors);
        size_t count = neighbors.size();
        EigBlock near = eigen_block(cloud, neighbors);

        Vec3 normal = near.normal;
        Vec3 to_center = kCubeCenter - p;
        if (normal.dot(to_center) < 0) normal = normal * -1.0;

        for (int c = 0; c < 10; ++c) row[c] = static_cast<float>(near.features[c]);
        row[10] = static_cast<float>(normal.x);
        row[11] = static_cast<float>(normal.y);
        row[12] = static_cast<float>(normal.z);
        row[13] = static_cast<float>(p.z / kCubeSide);
        row[14] = static_cast<float>((p - kCubeCenter).norm() / kCubeSide);
        row[15] = static_cast<float>(double(count) / double(n));

        gather(p, 2 * cfg.radius, neighbors);
        EigBlock far = eigen_block(cloud, neighbors);
        for (int c = 0; c < 10; ++c) row[16 + c] = static_cast<float>(far.features[c]);
        // columns 26..31 stay zero
    }
    return fm;
}

std::vector<uint8_t> encode_fmat(const FeatureMatrix& fm) {
    if (fm.rows == 0) throw Error(Err::Empty, "feature matrix has no rows");
    if (fm.cols == 0) throw Error(Err::InvalidParams, "feature matrix has zero columns");
    if (fm.positions.size() != size_t(fm.rows) * 3 ||
        fm.values.size() != size_t(fm.rows) * fm.cols)
        throw Error(Err::ShapeMismatch, "feature matrix field sizes disagree with header");
    for (float x : fm.positions)
        if (!std::isfinite(x)) throw Error(Err::NonFinite, "non-finite position");
    for (float x : fm.values)
        if (!std::isfinite(x)) throw Error(Err::NonFinite, "non-finite feature value");

    ByteWriter w;
    w.bytes("FMAT", 4);
    w.u16(1);
    w.u16(0);
    w.u32(fm.rows);
    w.u32(fm.cols);
    w.u64(0);
    for (float x : fm.positions) w.f32(x);
    for (float x : fm.values) w.f32(x);
    return w.take();
}

FeatureMatrix decode_fmat(std::span<const uint8_t> bytes) {
    ByteReader r(bytes.data(), bytes.size(), "FMAT");
    const uint8_t* magic = r.take(4);
    if (std::memcmp(magic, "FMAT", 4) != 0) throw Error(Err::BadMagic, "not a FMAT file");
    uint16_t version = r.u16();
    if (version != 1)
        throw Error(Err::VersionUnsupported,
                    "FMAT version " + std::to_string(version) + " unsupported");
    if (r.u16() != 0) throw Error(Err::Malformed, "FMAT flags must be zero");
    FeatureMatrix fm;
    fm.rows = r.u32();
    fm.cols = r.u32();
    if (r.u64() != 0) throw Error(Err::Malformed, "FMAT reserved field must be zero");
    if (fm.rows == 0) throw Error(Err::Malformed, "FMAT declares zero rows");
    if (fm.cols == 0) throw Error(Err::Malformed, "FMAT declares zero columns");

    // size sanity before any allocation: exact payload fit required
    const uint64_t per_row = (uint64_t(3) + fm.cols) * 4;
    if (fm.rows > r.remaining() / per_row)
        throw Error(Err::Truncated, "FMAT payload exceeds file size");
    if (uint64_t(fm.rows) * per_row != r.remaining())
        throw Error(Err::Malformed, "trailing bytes after FMAT payload");

    fm.positions.resize(size_t(fm.rows) * 3);
    for (float& x : fm.positions) x = r.f32();
    fm.values.resize(size_t(fm.rows) * fm.cols);
    for (float& x : fm.values) x = r.f32();
    for (float x : fm.positions)
        if (!std::isfinite(x)) throw Error(Err::NonFinite, "non-finite position");
    for (float x : fm.values)
        if (!std::isfinite(x)) throw Error(Err::NonFinite, "non-finite feature value");
    return fm;
}

void write_fmat(const FeatureMatrix& fm, const std::filesystem::path& path) {
    write_file_atomic(path, encode_fmat(fm));
}

FeatureMatrix read_fmat(const std::filesystem::path& path, PointCloud* cloud) {
    std::vector<uint8_t> bytes = read_file(path);
    FeatureMatrix fm = decode_fmat(bytes);
    if (cloud) *cloud = fmat_cloud(fm);
    return fm;
}

PointCloud fmat_cloud(const FeatureMatrix& fm) {
    PointCloud cloud;
    cloud.points.resize(fm.rows);
    for (uint32_t i = 0; i < fm.rows; ++i)
        cloud.points[i] = Vec3{fm.positions[size_t(i) * 3], fm.positions[size_t(i) * 3 + 1],
                               fm.positions[size_t(i) * 3 + 2]};
    return cloud;
}

}  // namespace featuredex
