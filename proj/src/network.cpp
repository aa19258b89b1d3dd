#include "remkit/network.hpp"

#include "remkit/error.hpp"
#include "remkit/masking.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace remkit {

namespace {

using Index = Eigen::Index;

void fill_uniform(Matrix& m, double bound, Rng& rng) {
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
}

double he_bound(int fan_in) {
    return std::sqrt(6.0 / static_cast<double>(fan_in > 0 ? fan_in : 1));
}

bool same(const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

void relu_inplace(Matrix& m) {
    m = m.cwiseMax(0.0);
}

}  // namespace

DenseLayer DenseLayer::zeros(int in_gen, int in_mem, int out_gen, int out_mem) {
    DenseLayer l;
    l.w_gg = Matrix::Zero(out_gen, in_gen);
    l.w_gm = Matrix::Zero(out_gen, in_mem);
    l.w_mg = Matrix::Zero(out_mem, in_gen);
    l.w_mm = Matrix::Zero(out_mem, in_mem);
    l.b_g = Matrix::Zero(1, out_gen);
    l.b_m = Matrix::Zero(1, out_mem);
    return l;
}

PartitionedNetwork::PartitionedNetwork(std::vector<DenseLayer> layers, double capacity_fraction)
    : layers_(std::move(layers)), capacity_fraction_(capacity_fraction) {
    if (layers_.empty()) throw std::invalid_argument("network needs at least an output layer");
    for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
        if (layers_[i].out_gen() != layers_[i + 1].in_gen() ||
            layers_[i].out_mem() != layers_[i + 1].in_mem())
            throw std::invalid_argument("layer " + std::to_string(i) +
                                        " output width does not match next layer input");
    }
    if (layers_.front().in_mem() != 0) throw std::invalid_argument("input layer cannot have mem inputs");
    if (layers_.back().out_mem() != 0) throw std::invalid_argument("output layer cannot have mem outputs");
}

std::vector<int> PartitionedNetwork::gen_widths() const {
    std::vector<int> w;
    for (std::size_t i = 0; i + 1 < layers_.size(); ++i) w.push_back(layers_[i].out_gen());
    return w;
}

std::vector<int> PartitionedNetwork::mem_widths() const {
    std::vector<int> w;
    for (std::size_t i = 0; i + 1 < layers_.size(); ++i) w.push_back(layers_[i].out_mem());
    return w;
}

bool PartitionedNetwork::has_mem() const {
    for (int w : mem_widths())
        if (w > 0) return true;
    return false;
}

std::size_t PartitionedNetwork::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) l.visit([&](const Matrix& m, bool) { n += m.size(); });
    return n;
}

std::size_t PartitionedNetwork::mem_parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_)
        l.visit([&](const Matrix& m, bool is_gen) {
            if (!is_gen) n += m.size();
        });
    return n;
}

bool PartitionedNetwork::all_finite() const {
    bool ok = true;
    for (const auto& l : layers_) l.visit([&](const Matrix& m, bool) { ok = ok && remkit::all_finite(m); });
    return ok;
}

bool operator==(const PartitionedNetwork& a, const PartitionedNetwork& b) {
    if (a.layers_.size() != b.layers_.size()) return false;
    for (std::size_t i = 0; i < a.layers_.size(); ++i) {
        const auto& x = a.layers_[i];
        const auto& y = b.layers_[i];
        if (!same(x.w_gg, y.w_gg) || !same(x.w_gm, y.w_gm) || !same(x.w_mg, y.w_mg) ||
            !same(x.w_mm, y.w_mm) || !same(x.b_g, y.b_g) || !same(x.b_m, y.b_m))
            return false;
    }
    return true;
}

Gradients Gradients::zeros_like(const PartitionedNetwork& net) {
    Gradients g;
    for (const auto& l : net.layers())
        g.layers.push_back(DenseLayer::zeros(l.in_gen(), l.in_mem(), l.out_gen(), l.out_mem()));
    return g;
}

Gradients& Gradients::operator+=(const Gradients& other) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        auto& a = layers[i];
        const auto& b = other.layers[i];
        a.w_gg += b.w_gg;
        a.w_gm += b.w_gm;
        a.w_mg += b.w_mg;
        a.w_mm += b.w_mm;
        a.b_g += b.b_g;
        a.b_m += b.b_m;
    }
    return *this;
}

Gradients& Gradients::operator*=(double s) {
    for (auto& l : layers) l.visit([&](Matrix& m, bool) { m *= s; });
    return *this;
}

bool Gradients::all_finite() const {
    bool ok = true;
    for (const auto& l : layers) l.visit([&](const Matrix& m, bool) { ok = ok && remkit::all_finite(m); });
    return ok;
}

PartitionedNetwork init_network(std::span<const int> profile, double capacity_fraction,
                                std::span<const int> mem_units, int input_dim, int num_classes,
                                Rng rng) {
    if (!(capacity_fraction > 0.0 && capacity_fraction <= 1.0))
        throw std::invalid_argument("capacity_fraction must be in (0, 1]");
    if (input_dim < 1 || num_classes < 1) throw std::invalid_argument("input_dim and num_classes must be >= 1");
    if (!mem_units.empty() && mem_units.size() != profile.size())
        throw std::invalid_argument("mem_units must have one entry per hidden layer");

    std::vector<int> gen, mem;
    for (std::size_t i = 0; i < profile.size(); ++i) {
        if (profile[i] < 1) throw std::invalid_argument("profile widths must be >= 1");
        const int w = static_cast<int>(std::lround(capacity_fraction * profile[i]));
        if (w < 1)
            throw std::invalid_argument("hidden layer " + std::to_string(i) +
                                        " has zero width after capacity scaling");
        gen.push_back(w);
        const int m = mem_units.empty() ? 0 : mem_units[i];
        if (m < 0) throw std::invalid_argument("mem_units must be >= 0");
        mem.push_back(m);
    }

    std::vector<DenseLayer> layers;
    int in_g = input_dim, in_m = 0;
    for (std::size_t i = 0; i <= gen.size(); ++i) {
        const bool out_layer = i == gen.size();
        const int out_g = out_layer ? num_classes : gen[i];
        const int out_m = out_layer ? 0 : mem[i];
        DenseLayer l = DenseLayer::zeros(in_g, in_m, out_g, out_m);
        const double bound = he_bound(in_g + in_m);
        fill_uniform(l.w_gg, bound, rng);
        fill_uniform(l.w_gm, bound, rng);
        fill_uniform(l.w_mg, bound, rng);
        fill_uniform(l.w_mm, bound, rng);
        layers.push_back(std::move(l));
        in_g = out_g;
        in_m = out_m;
    }
    return PartitionedNetwork(std::move(layers), capacity_fraction);
}

ForwardCache forward(const PartitionedNetwork& net, const Matrix& batch, ForwardMode mode,
                     const BatchMasks* masks) {
    const auto& layers = net.layers();
    const std::size_t hidden = net.hidden_count();
    if (batch.cols() != net.input_dim())
        throw std::invalid_argument("forward: batch width " + std::to_string(batch.cols()) +
                                    " != input dim " + std::to_string(net.input_dim()));
    if (mode == ForwardMode::masked) {
        if (masks == nullptr || masks->size() != hidden)
            throw std::invalid_argument("forward: masked mode needs one mask matrix per hidden layer");
        for (std::size_t i = 0; i < hidden; ++i) {
            const auto& m = (*masks)[i];
            if (m.rows() != batch.rows() || m.cols() != layers[i].out_mem())
                throw std::invalid_argument("forward: mask shape mismatch at layer " + std::to_string(i));
        }
    }

    ForwardCache c;
    c.mode = mode;
    c.input = batch;
    if (mode == ForwardMode::masked) c.masks = *masks;
    const bool use_mem = mode != ForwardMode::gen_only;

    const Matrix* a_g = &c.input;
    const Matrix* a_m = nullptr;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        Matrix z_g(batch.rows(), l.out_gen());
        z_g.noalias() = *a_g * l.w_gg.transpose();
        if (use_mem && a_m != nullptr && l.in_mem() > 0) z_g.noalias() += *a_m * l.w_gm.transpose();
        z_g.rowwise() += l.b_g.row(0);

        Matrix z_m;
        if (use_mem && l.out_mem() > 0) {
            z_m.resize(batch.rows(), l.out_mem());
            z_m.noalias() = *a_g * l.w_mg.transpose();
            if (a_m != nullptr && l.in_mem() > 0) z_m.noalias() += *a_m * l.w_mm.transpose();
            z_m.rowwise() += l.b_m.row(0);
        }

        if (i + 1 == layers.size()) {
            c.logits = std::move(z_g);
            break;
        }
        relu_inplace(z_g);
        c.act_gen.push_back(std::move(z_g));
        if (use_mem) {
            relu_inplace(z_m);
            if (mode == ForwardMode::masked && z_m.size() > 0) z_m.array() *= c.masks[i].array();
        }
        c.act_mem.push_back(std::move(z_m));
        a_g = &c.act_gen.back();
        a_m = use_mem ? &c.act_mem.back() : nullptr;
    }
    return c;
}

ForwardCache forward(const PartitionedNetwork& net, const Matrix& batch, ForwardMode mode,
                     const MaskTable& table, std::span<const std::int64_t> ids) {
    if (mode != ForwardMode::masked) return forward(net, batch, mode);
    if (static_cast<Eigen::Index>(ids.size()) != batch.rows())
        throw std::invalid_argument("forward: ids length does not match batch rows");
    const BatchMasks masks = table.batch_masks(ids);
    return forward(net, batch, mode, &masks);
}

Matrix logits(const PartitionedNetwork& net, const Matrix& batch, ForwardMode mode) {
    return forward(net, batch, mode).logits;
}

Gradients backward(const PartitionedNetwork& net, const ForwardCache& cache, const Matrix& dlogits) {
    const auto& layers = net.layers();
    if (dlogits.rows() != cache.logits.rows() || dlogits.cols() != cache.logits.cols())
        throw std::invalid_argument("backward: dlogits shape does not match cached logits");
    if (cache.act_gen.size() != net.hidden_count())
        throw std::invalid_argument("backward: cache does not belong to this network");

    const bool use_mem = cache.mode != ForwardMode::gen_only;
    Gradients g = Gradients::zeros_like(net);

    Matrix delta_g = dlogits;
    Matrix delta_m;  // empty for the output layer
    for (std::size_t idx = layers.size(); idx-- > 0;) {
        const auto& l = layers[idx];
        auto& gl = g.layers[idx];
        const Matrix& in_g = idx == 0 ? cache.input : cache.act_gen[idx - 1];
        const Matrix* in_m = (idx > 0 && use_mem) ? &cache.act_mem[idx - 1] : nullptr;
        const bool has_in_m = in_m != nullptr && l.in_mem() > 0;
        const bool has_out_m = use_mem && l.out_mem() > 0;

        gl.w_gg.noalias() = delta_g.transpose() * in_g;
        gl.b_g = delta_g.colwise().sum();
        if (has_in_m) gl.w_gm.noalias() = delta_g.transpose() * *in_m;
        if (has_out_m) {
            gl.w_mg.noalias() = delta_m.transpose() * in_g;
            gl.b_m = delta_m.colwise().sum();
            if (has_in_m) gl.w_mm.noalias() = delta_m.transpose() * *in_m;
        }
        if (idx == 0) break;

        Matrix d_in_g = delta_g * l.w_gg;
        if (has_out_m) d_in_g.noalias() += delta_m * l.w_mg;
        Matrix d_in_m;
        if (has_in_m) {
            d_in_m = delta_g * l.w_gm;
            if (has_out_m) d_in_m.noalias() += delta_m * l.w_mm;
        }
        // ReLU derivative from the post-activation; masked-off units are
        // stored as exact zeros, so the same test applies the mask.
        delta_g = d_in_g.cwiseProduct((in_g.array() > 0.0).cast<double>().matrix());
        if (has_in_m)
            delta_m = d_in_m.cwiseProduct((in_m->array() > 0.0).cast<double>().matrix());
        else
            delta_m.resize(0, 0);
    }
    return g;
}

PartitionedNetwork expand_network(const PartitionedNetwork& net, std::span<const int> add_units, Rng rng) {
    const std::size_t hidden = net.hidden_count();
    if (add_units.size() != hidden)
        throw std::invalid_argument("expand_network: need one unit count per hidden layer");
    for (int a : add_units)
        if (a < 0) throw std::invalid_argument("expand_network: negative unit count");

    std::vector<DenseLayer> out;
    int prev_old_m = 0, prev_add = 0;
    for (std::size_t i = 0; i < net.layers().size(); ++i) {
        const auto& l = net.layers()[i];
        const int add_out = i < hidden ? add_units[i] : 0;
        const int add_in = prev_add;
        const int old_in_m = prev_old_m;
        const int old_out_m = l.out_mem();
        DenseLayer e = DenseLayer::zeros(l.in_gen(), old_in_m + add_in, l.out_gen(), old_out_m + add_out);
        const double bound = he_bound(l.in_gen() + old_in_m + add_in);

        e.w_gg = l.w_gg;
        e.b_g = l.b_g;
        // New columns of the gen-output rows (mem inputs added below this layer).
        fill_uniform(e.w_gm, bound, rng);
        e.w_gm.leftCols(old_in_m) = l.w_gm;
        fill_uniform(e.w_mg, bound, rng);
        e.w_mg.topRows(old_out_m) = l.w_mg;
        fill_uniform(e.w_mm, bound, rng);
        e.w_mm.topLeftCorner(old_out_m, old_in_m) = l.w_mm;
        e.b_m.leftCols(old_out_m) = l.b_m;
        out.push_back(std::move(e));

        prev_old_m = old_out_m;
        prev_add = add_out;
    }
    return PartitionedNetwork(std::move(out), net.capacity_fraction());
}

PartitionedNetwork excise_memorization(const PartitionedNetwork& net) {
    std::vector<DenseLayer> out;
    for (const auto& l : net.layers()) {
        DenseLayer e = DenseLayer::zeros(l.in_gen(), 0, l.out_gen(), 0);
        e.w_gg = l.w_gg;
        e.b_g = l.b_g;
        out.push_back(std::move(e));
    }
    return PartitionedNetwork(std::move(out), net.capacity_fraction());
}

}  // namespace remkit
