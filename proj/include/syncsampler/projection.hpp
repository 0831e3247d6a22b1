#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "syncsampler/tensor.hpp"

namespace syncsampler {

// A camera on the equirect sphere, or a window on the ring (offset, width).
struct View {
    double azimuth = 0.0;    // degrees
    double elevation = 0.0;  // degrees
    double fov = 72.0;       // degrees, horizontal
    int width = 64;
    int height = 64;
    int id = 0;
    int offset = 0;  // ring windows only

    void validate() const;
    friend bool operator==(const View&, const View&) = default;
};

std::vector<View> views_from_json(const nlohmann::json& j);
nlohmann::json views_to_json(std::span<const View> views);
std::vector<View> load_views_file(const std::string& path);

struct SplatAccumulator {
    Tensor value_sum;
    Tensor weight_sum;

    explicit SplatAccumulator(const Shape& canonical)
        : value_sum(canonical), weight_sum(canonical) {}

    void add(const SplatAccumulator& other);
    // value_sum / weight_sum, falling back to prior (or 0) where weight is 0.
    Tensor resolve(const Tensor* prior) const;
};

// ---- Equirect: canonical Hc x Wc x C lat-long grid -------------------------

struct BilinearTap {
    std::array<std::size_t, 4> site;  // row * Wc + col
    std::array<double, 4> weight;
};

// (longitude, latitude) in radians of the ray through pixel center (r, c).
std::array<double, 2> equirect_pixel_direction(const View& v, int r, int c);
// Bilinear footprint of a (lon, lat) direction on an Hc x Wc grid.
BilinearTap equirect_tap(std::size_t Hc, std::size_t Wc, double lon, double lat);
std::vector<BilinearTap> equirect_taps(std::size_t Hc, std::size_t Wc, const View& v);

double equirect_sample(const Tensor& z, double lon, double lat, std::size_t channel = 0);
Tensor equirect_project(const Tensor& z, const View& v);
SplatAccumulator equirect_splat(const Tensor& img, const View& v, const Shape& canonical);

// ---- Ring: n values, windows of w consecutive entries -----------------------

Tensor ring_project(const Tensor& z, int offset, int w);
SplatAccumulator ring_splat(const Tensor& window, int offset, std::size_t n);

// ---- Masked image -----------------------------------------------------------

// argmin ‖(1−M)⊙(z−x0)‖² + ‖M⊙(z−y)‖² = M⊙y + (1−M)⊙x0
Tensor masked_synchronize(const Tensor& mask, const Tensor& y, const Tensor& x0);

// ---- Operator family used by the samplers -----------------------------------

class Projector {
public:
    virtual ~Projector() = default;

    virtual Shape canonical_shape() const = 0;
    virtual Shape instance_shape(const View& v) const = 0;
    virtual Tensor project(const Tensor& z, const View& v) const = 0;
    virtual void splat(const Tensor& img, const View& v, SplatAccumulator& acc) const = 0;

    // The synchronization solve. Default: least-squares aggregation.
    virtual Tensor synchronize(std::span<const View> views, std::span<const Tensor> images,
                               const Tensor* prior) const;

    // Spatial structure of the canonical grid, for seam metrics. A site is a
    // texel position; channels are stacked at each site.
    virtual std::size_t site_count() const = 0;
    virtual std::size_t channels() const = 0;
    // Neighbors used by the central-difference gradient, ordered
    // (minus, plus) per axis. Returns false if a neighbor is missing.
    virtual bool gradient_neighbors(std::size_t site, std::vector<std::array<std::size_t, 2>>& axes) const = 0;
};

Tensor aggregate_least_squares(const Projector& proj, std::span<const View> views,
                               std::span<const Tensor> images, const Tensor* prior = nullptr);

class EquirectProjector : public Projector {
public:
    EquirectProjector(std::size_t Hc, std::size_t Wc, std::size_t C = 1);

    Shape canonical_shape() const override { return {Hc_, Wc_, C_}; }
    Shape instance_shape(const View& v) const override;
    Tensor project(const Tensor& z, const View& v) const override;
    void splat(const Tensor& img, const View& v, SplatAccumulator& acc) const override;
    std::size_t site_count() const override { return Hc_ * Wc_; }
    std::size_t channels() const override { return C_; }
    bool gradient_neighbors(std::size_t site, std::vector<std::array<std::size_t, 2>>& axes) const override;

private:
    std::size_t Hc_, Wc_, C_;
};

class RingProjector : public Projector {
public:
    RingProjector(std::size_t n, int w);

    std::size_t size() const { return n_; }
    int window() const { return w_; }

    Shape canonical_shape() const override { return {n_}; }
    Shape instance_shape(const View&) const override { return {static_cast<std::size_t>(w_)}; }
    Tensor project(const Tensor& z, const View& v) const override;
    void splat(const Tensor& img, const View& v, SplatAccumulator& acc) const override;
    std::size_t site_count() const override { return n_; }
    std::size_t channels() const override { return 1; }
    bool gradient_neighbors(std::size_t site, std::vector<std::array<std::size_t, 2>>& axes) const override;

private:
    std::size_t n_;
    int w_;
};

// Canonical space equals instance space; a single view.
class IdentityProjector : public Projector {
public:
    explicit IdentityProjector(Shape shape);

    Shape canonical_shape() const override { return shape_; }
    Shape instance_shape(const View&) const override { return shape_; }
    Tensor project(const Tensor& z, const View& v) const override;
    void splat(const Tensor& img, const View& v, SplatAccumulator& acc) const override;
    std::size_t site_count() const override { return shape_size(shape_); }
    std::size_t channels() const override { return 1; }
    bool gradient_neighbors(std::size_t, std::vector<std::array<std::size_t, 2>>&) const override {
        return false;
    }

private:
    Shape shape_;
};

// Identity projection whose synchronization enforces the measurement y on
// the observed entries (mask = 1).
class MaskedProjector : public IdentityProjector {
public:
    MaskedProjector(Tensor mask, Tensor y);

    const Tensor& mask() const { return mask_; }
    const Tensor& measurement() const { return y_; }

    Tensor synchronize(std::span<const View> views, std::span<const Tensor> images,
                       const Tensor* prior) const override;

private:
    Tensor mask_, y_;
};

// ---- View sets --------------------------------------------------------------

struct EquirectLayout {
    int n_views = 5;
    double fov = 72.0;
    double elevation = 0.0;
    double base_azimuth = 0.0;
    int width = 64;
    int height = 64;
};

// Azimuths base + k·360/n, shifted by 180/n for parity 1; requires n·fov = 360.
std::vector<View> sample_nonoverlapping_views(int step_parity, const EquirectLayout& layout);
// Offsets k·w, shifted by w/2 for parity 1; requires w | n.
std::vector<View> ring_nonoverlapping_views(int step_parity, std::size_t n, int w);

// The single view of an identity or masked projector.
View identity_view();

}  // namespace syncsampler
