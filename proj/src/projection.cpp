#include "syncsampler/projection.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "syncsampler/parallel.hpp"

namespace syncsampler {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;
}  // namespace

void View::validate() const {
    if (!(fov > 0.0 && fov < 180.0)) throw std::invalid_argument("view: fov must be in (0,180)");
    if (width < 1 || height < 1) throw std::invalid_argument("view: width and height must be >= 1");
}

std::vector<View> views_from_json(const nlohmann::json& j) {
    std::vector<View> out;
    int id = 0;
    for (const auto& e : j) {
        View v;
        v.azimuth = e.at("azimuth").get<double>();
        v.elevation = e.value("elevation", 0.0);
        v.fov = e.at("fov").get<double>();
        v.width = e.at("width").get<int>();
        v.height = e.at("height").get<int>();
        v.id = id++;
        v.validate();
        out.push_back(v);
    }
    if (out.empty()) throw std::invalid_argument("view list is empty");
    return out;
}

nlohmann::json views_to_json(std::span<const View> views) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& v : views)
        j.push_back({{"azimuth", v.azimuth},
                     {"elevation", v.elevation},
                     {"fov", v.fov},
                     {"width", v.width},
                     {"height", v.height}});
    return j;
}

std::vector<View> load_views_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::ios_base::failure("cannot open views file: " + path);
    return views_from_json(nlohmann::json::parse(in));
}

void SplatAccumulator::add(const SplatAccumulator& other) {
    require_same_shape(value_sum, other.value_sum, "SplatAccumulator::add");
    for (std::size_t i = 0; i < value_sum.size(); ++i) {
        value_sum[i] += other.value_sum[i];
        weight_sum[i] += other.weight_sum[i];
    }
}

Tensor SplatAccumulator::resolve(const Tensor* prior) const {
    if (prior) require_same_shape(*prior, value_sum, "aggregate prior");
    Tensor z(value_sum.shape());
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (weight_sum[i] > 0.0)
            z[i] = value_sum[i] / weight_sum[i];
        else
            z[i] = prior ? (*prior)[i] : 0.0;
    }
    return z;
}

// ---- Equirect ---------------------------------------------------------------

std::array<double, 2> equirect_pixel_direction(const View& v, int r, int c) {
    const double f = 0.5 * v.width / std::tan(0.5 * v.fov * kDeg);
    const double x = c + 0.5 - 0.5 * v.width;
    const double y = -(r + 0.5 - 0.5 * v.height);
    const double z = f;
    // pitch by elevation about the x axis, then yaw by azimuth about the y axis
    const double ce = std::cos(v.elevation * kDeg), se = std::sin(v.elevation * kDeg);
    const double y1 = y * ce + z * se;
    const double z1 = -y * se + z * ce;
    const double ca = std::cos(v.azimuth * kDeg), sa = std::sin(v.azimuth * kDeg);
    const double x2 = x * ca + z1 * sa;
    const double z2 = -x * sa + z1 * ca;
    return {std::atan2(x2, z2), std::atan2(y1, std::hypot(x2, z2))};
}

BilinearTap equirect_tap(std::size_t Hc, std::size_t Wc, double lon, double lat) {
    const double u = (lon + kPi) / (2.0 * kPi) * static_cast<double>(Wc) - 0.5;
    const double v = (0.5 * kPi - lat) / kPi * static_cast<double>(Hc) - 0.5;
    const double u0 = std::floor(u), v0 = std::floor(v);
    const double fu = u - u0, fv = v - v0;
    const auto W = static_cast<long>(Wc), H = static_cast<long>(Hc);
    auto wrap = [W](long j) { return static_cast<std::size_t>(((j % W) + W) % W); };
    auto clamp = [H](long i) { return static_cast<std::size_t>(std::clamp(i, 0L, H - 1)); };
    const long j = static_cast<long>(u0), i = static_cast<long>(v0);
    const std::size_t c0 = wrap(j), c1 = wrap(j + 1), r0 = clamp(i), r1 = clamp(i + 1);
    return {{r0 * Wc + c0, r0 * Wc + c1, r1 * Wc + c0, r1 * Wc + c1},
            {(1 - fv) * (1 - fu), (1 - fv) * fu, fv * (1 - fu), fv * fu}};
}

std::vector<BilinearTap> equirect_taps(std::size_t Hc, std::size_t Wc, const View& v) {
    v.validate();
    std::vector<BilinearTap> taps;
    taps.reserve(static_cast<std::size_t>(v.width) * static_cast<std::size_t>(v.height));
    for (int r = 0; r < v.height; ++r)
        for (int c = 0; c < v.width; ++c) {
            const auto [lon, lat] = equirect_pixel_direction(v, r, c);
            taps.push_back(equirect_tap(Hc, Wc, lon, lat));
        }
    return taps;
}

namespace {

void require_equirect(const Tensor& z) {
    if (z.shape().size() != 3 || z.shape()[1] != 2 * z.shape()[0])
        throw std::invalid_argument("equirect grid must be Hc x Wc x C with Wc = 2*Hc, got " +
                                    shape_string(z.shape()));
}

}  // namespace

double equirect_sample(const Tensor& z, double lon, double lat, std::size_t channel) {
    require_equirect(z);
    const std::size_t Hc = z.shape()[0], Wc = z.shape()[1], C = z.shape()[2];
    const BilinearTap tap = equirect_tap(Hc, Wc, lon, lat);
    double s = 0.0;
    for (int k = 0; k < 4; ++k) s += tap.weight[k] * z[tap.site[k] * C + channel];
    return s;
}

Tensor equirect_project(const Tensor& z, const View& v) {
    require_equirect(z);
    const std::size_t Hc = z.shape()[0], Wc = z.shape()[1], C = z.shape()[2];
    const auto taps = equirect_taps(Hc, Wc, v);
    Tensor img(Shape{static_cast<std::size_t>(v.height), static_cast<std::size_t>(v.width), C});
    for (std::size_t p = 0; p < taps.size(); ++p)
        for (std::size_t ch = 0; ch < C; ++ch) {
            double s = 0.0;
            for (int k = 0; k < 4; ++k) s += taps[p].weight[k] * z[taps[p].site[k] * C + ch];
            img[p * C + ch] = s;
        }
    return img;
}

namespace {

void equirect_splat_into(const Tensor& img, const View& v, SplatAccumulator& acc) {
    const Shape& cs = acc.value_sum.shape();
    const std::size_t Hc = cs[0], Wc = cs[1], C = cs[2];
    const Shape expect{static_cast<std::size_t>(v.height), static_cast<std::size_t>(v.width), C};
    if (img.shape() != expect)
        throw std::invalid_argument("equirect_splat: image " + shape_string(img.shape()) +
                                    " does not match view " + shape_string(expect));
    const auto taps = equirect_taps(Hc, Wc, v);
    for (std::size_t p = 0; p < taps.size(); ++p)
        for (int k = 0; k < 4; ++k) {
            const double w = taps[p].weight[k];
            if (w == 0.0) continue;
            for (std::size_t ch = 0; ch < C; ++ch) {
                const std::size_t idx = taps[p].site[k] * C + ch;
                acc.value_sum[idx] += w * img[p * C + ch];
                acc.weight_sum[idx] += w;
            }
        }
}

}  // namespace

SplatAccumulator equirect_splat(const Tensor& img, const View& v, const Shape& canonical) {
    if (canonical.size() != 3 || canonical[1] != 2 * canonical[0])
        throw std::invalid_argument("equirect_splat: canonical shape must be Hc x 2Hc x C");
    SplatAccumulator acc(canonical);
    equirect_splat_into(img, v, acc);
    return acc;
}

// ---- Ring -------------------------------------------------------------------

Tensor ring_project(const Tensor& z, int offset, int w) {
    const std::size_t n = z.size();
    if (w < 1 || static_cast<std::size_t>(w) > n) throw std::invalid_argument("ring: need 1 <= w <= n");
    if (offset < 0 || static_cast<std::size_t>(offset) >= n)
        throw std::invalid_argument("ring: offset outside [0, n)");
    Tensor out(Shape{static_cast<std::size_t>(w)});
    for (int k = 0; k < w; ++k) out[static_cast<std::size_t>(k)] = z[(static_cast<std::size_t>(offset) + k) % n];
    return out;
}

SplatAccumulator ring_splat(const Tensor& window, int offset, std::size_t n) {
    if (window.size() > n) throw std::invalid_argument("ring_splat: window longer than ring");
    if (offset < 0 || static_cast<std::size_t>(offset) >= n)
        throw std::invalid_argument("ring: offset outside [0, n)");
    SplatAccumulator acc(Shape{n});
    for (std::size_t k = 0; k < window.size(); ++k) {
        const std::size_t i = (static_cast<std::size_t>(offset) + k) % n;
        acc.value_sum[i] += window[k];
        acc.weight_sum[i] += 1.0;
    }
    return acc;
}

// ---- Masked -----------------------------------------------------------------

Tensor masked_synchronize(const Tensor& mask, const Tensor& y, const Tensor& x0) {
    require_same_shape(mask, y, "masked_synchronize");
    require_same_shape(mask, x0, "masked_synchronize");
    Tensor z(x0.shape());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = mask[i] != 0.0 ? y[i] : x0[i];
    return z;
}

// ---- Projector family -------------------------------------------------------

Tensor aggregate_least_squares(const Projector& proj, std::span<const View> views,
                               std::span<const Tensor> images, const Tensor* prior) {
    if (views.empty()) throw std::invalid_argument("aggregate_least_squares: no targets");
    if (views.size() != images.size())
        throw std::invalid_argument("aggregate_least_squares: views and images differ in count");
    const Shape cs = proj.canonical_shape();
    std::vector<SplatAccumulator> parts(views.size(), SplatAccumulator(cs));
    parallel_for(views.size(), [&](std::size_t i) { proj.splat(images[i], views[i], parts[i]); });
    SplatAccumulator total(cs);
    for (const auto& p : parts) total.add(p);
    return total.resolve(prior);
}

Tensor Projector::synchronize(std::span<const View> views, std::span<const Tensor> images,
                              const Tensor* prior) const {
    return aggregate_least_squares(*this, views, images, prior);
}

EquirectProjector::EquirectProjector(std::size_t Hc, std::size_t Wc, std::size_t C)
    : Hc_(Hc), Wc_(Wc), C_(C) {
    if (Hc < 2 || Wc != 2 * Hc || C < 1)
        throw std::invalid_argument("equirect grid must satisfy Wc = 2*Hc, Hc >= 2, C >= 1");
}

Shape EquirectProjector::instance_shape(const View& v) const {
    return {static_cast<std::size_t>(v.height), static_cast<std::size_t>(v.width), C_};
}

Tensor EquirectProjector::project(const Tensor& z, const View& v) const {
    if (z.shape() != canonical_shape()) throw std::invalid_argument("equirect_project: grid shape mismatch");
    return equirect_project(z, v);
}

void EquirectProjector::splat(const Tensor& img, const View& v, SplatAccumulator& acc) const {
    if (acc.value_sum.shape() != canonical_shape())
        throw std::invalid_argument("equirect splat: accumulator shape mismatch");
    equirect_splat_into(img, v, acc);
}

bool EquirectProjector::gradient_neighbors(std::size_t site,
                                           std::vector<std::array<std::size_t, 2>>& axes) const {
    const std::size_t i = site / Wc_, j = site % Wc_;
    if (i == 0 || i + 1 >= Hc_) return false;
    axes.clear();
    axes.push_back({i * Wc_ + (j + Wc_ - 1) % Wc_, i * Wc_ + (j + 1) % Wc_});
    axes.push_back({(i - 1) * Wc_ + j, (i + 1) * Wc_ + j});
    return true;
}

RingProjector::RingProjector(std::size_t n, int w) : n_(n), w_(w) {
    if (w < 1 || static_cast<std::size_t>(w) > n) throw std::invalid_argument("ring: need 1 <= w <= n");
}

Tensor RingProjector::project(const Tensor& z, const View& v) const {
    if (z.shape() != canonical_shape()) throw std::invalid_argument("ring_project: grid shape mismatch");
    return ring_project(z, v.offset, w_);
}

void RingProjector::splat(const Tensor& img, const View& v, SplatAccumulator& acc) const {
    if (img.size() != static_cast<std::size_t>(w_))
        throw std::invalid_argument("ring_splat: window length mismatch");
    if (v.offset < 0 || static_cast<std::size_t>(v.offset) >= n_)
        throw std::invalid_argument("ring: offset outside [0, n)");
    for (std::size_t k = 0; k < img.size(); ++k) {
        const std::size_t i = (static_cast<std::size_t>(v.offset) + k) % n_;
        acc.value_sum[i] += img[k];
        acc.weight_sum[i] += 1.0;
    }
}

bool RingProjector::gradient_neighbors(std::size_t site,
                                       std::vector<std::array<std::size_t, 2>>& axes) const {
    axes.assign(1, {(site + n_ - 1) % n_, (site + 1) % n_});
    return true;
}

IdentityProjector::IdentityProjector(Shape shape) : shape_(std::move(shape)) {
    if (shape_size(shape_) == 0) throw std::invalid_argument("identity projector: empty shape");
}

Tensor IdentityProjector::project(const Tensor& z, const View&) const {
    if (z.shape() != shape_) throw std::invalid_argument("identity project: shape mismatch");
    return z;
}

void IdentityProjector::splat(const Tensor& img, const View&, SplatAccumulator& acc) const {
    require_same_shape(img, acc.value_sum, "identity splat");
    for (std::size_t i = 0; i < img.size(); ++i) {
        acc.value_sum[i] += img[i];
        acc.weight_sum[i] += 1.0;
    }
}

MaskedProjector::MaskedProjector(Tensor mask, Tensor y)
    : IdentityProjector(mask.shape()), mask_(std::move(mask)), y_(std::move(y)) {
    require_same_shape(mask_, y_, "masked projector");
    for (double m : mask_.values())
        if (m != 0.0 && m != 1.0) throw std::invalid_argument("mask entries must be 0 or 1");
}

Tensor MaskedProjector::synchronize(std::span<const View> views, std::span<const Tensor> images,
                                    const Tensor* prior) const {
    return masked_synchronize(mask_, y_, aggregate_least_squares(*this, views, images, prior));
}

// ---- View sets --------------------------------------------------------------

std::vector<View> sample_nonoverlapping_views(int step_parity, const EquirectLayout& layout) {
    if (layout.n_views < 1) throw std::invalid_argument("view set: n_views must be >= 1");
    if (std::abs(layout.n_views * layout.fov - 360.0) > 1e-9)
        throw std::invalid_argument("view set: n_views * fov must equal 360 for non-overlapping tiling");
    const int parity = step_parity & 1;
    const double spacing = 360.0 / layout.n_views;
    std::vector<View> out;
    for (int k = 0; k < layout.n_views; ++k) {
        View v;
        v.azimuth = std::fmod(layout.base_azimuth + k * spacing + parity * 0.5 * spacing, 360.0);
        if (v.azimuth < 0) v.azimuth += 360.0;
        v.elevation = layout.elevation;
        v.fov = layout.fov;
        v.width = layout.width;
        v.height = layout.height;
        v.id = parity * layout.n_views + k;
        v.validate();
        out.push_back(v);
    }
    return out;
}

std::vector<View> ring_nonoverlapping_views(int step_parity, std::size_t n, int w) {
    if (w < 1 || n % static_cast<std::size_t>(w) != 0)
        throw std::invalid_argument("ring view set: window must divide ring length");
    const int parity = step_parity & 1;
    const auto count = static_cast<int>(n / static_cast<std::size_t>(w));
    std::vector<View> out;
    for (int k = 0; k < count; ++k) {
        View v;
        v.offset = k * w + parity * (w / 2);
        v.width = w;
        v.height = 1;
        v.id = parity * count + k;
        out.push_back(v);
    }
    return out;
}

View identity_view() { return View{}; }

}  // namespace syncsampler
