#include "pta/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "pta/errors.hpp"
#include "pta/rng.hpp"

namespace pta {
namespace {

using nlohmann::json;

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

void relu_inplace(std::vector<double>& v) {
    for (double& x : v)
        if (x < 0.0) x = 0.0;
}

// logits -> probabilities in place; returns -log p[label]
double softmax_ce(std::vector<double>& logits, int label) {
    double peak = *std::max_element(logits.begin(), logits.end());
    double norm = 0.0;
    for (double& z : logits) {
        z = std::exp(z - peak);
        norm += z;
    }
    for (double& z : logits) z /= norm;
    return -std::log(std::max(logits[static_cast<std::size_t>(label)], 1e-300));
}

struct ForwardCache {
    std::vector<std::vector<double>> acts;  // acts[0] = input, acts[l+1] = layer l output
    std::vector<std::vector<double>> pre;   // pre-activation of layer l
};

void forward_cached(const std::vector<DenseLayer>& layers, const double* input,
                    std::size_t dim, ForwardCache& cache) {
    cache.acts.assign(layers.size() + 1, {});
    cache.pre.assign(layers.size(), {});
    cache.acts[0].assign(input, input + dim);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const DenseLayer& layer = layers[l];
        const std::vector<double>& x = cache.acts[l];
        std::vector<double> z(layer.weight.rows());
        for (std::size_t r = 0; r < layer.weight.rows(); ++r) {
            double acc = layer.bias[r];
            for (std::size_t c = 0; c < layer.weight.cols(); ++c)
                acc += layer.weight(r, c) * x[c];
            z[r] = acc;
        }
        cache.pre[l] = z;
        if (layer.activation == Activation::Relu) relu_inplace(z);
        cache.acts[l + 1] = std::move(z);
    }
}

// Per-sample loss gradient; accumulates += into dW/db when given, and can
// also square-accumulate into sq for the curvature proxy.
double backprop_sample(const std::vector<DenseLayer>& layers, const double* input,
                       std::size_t dim, int label, std::vector<Matrix>* dW,
                       std::vector<std::vector<double>>* db, std::vector<Matrix>* sq,
                       ForwardCache& cache) {
    forward_cached(layers, input, dim, cache);
    std::vector<double> delta = cache.acts.back();
    const double loss = softmax_ce(delta, label);
    delta[static_cast<std::size_t>(label)] -= 1.0;

    for (std::size_t li = layers.size(); li-- > 0;) {
        const DenseLayer& layer = layers[li];
        const std::vector<double>& x = cache.acts[li];
        if (dW) {
            Matrix& g = (*dW)[li];
            for (std::size_t r = 0; r < layer.weight.rows(); ++r)
                for (std::size_t c = 0; c < layer.weight.cols(); ++c)
                    g(r, c) += delta[r] * x[c];
        }
        if (sq) {
            Matrix& h = (*sq)[li];
            for (std::size_t r = 0; r < layer.weight.rows(); ++r)
                for (std::size_t c = 0; c < layer.weight.cols(); ++c) {
                    const double g = delta[r] * x[c];
                    h(r, c) += g * g;
                }
        }
        if (db)
            for (std::size_t r = 0; r < layer.weight.rows(); ++r)
                (*db)[li][r] += delta[r];
        if (li == 0) break;
        std::vector<double> prev(layer.weight.cols(), 0.0);
        for (std::size_t r = 0; r < layer.weight.rows(); ++r)
            for (std::size_t c = 0; c < layer.weight.cols(); ++c)
                prev[c] += layer.weight(r, c) * delta[r];
        if (layers[li - 1].activation == Activation::Relu)
            for (std::size_t c = 0; c < prev.size(); ++c)
                if (cache.pre[li - 1][c] <= 0.0) prev[c] = 0.0;
        delta = std::move(prev);
    }
    return loss;
}

struct AdamSlot {
    Matrix mW, vW;
    std::vector<double> mb, vb;
};

void adam_step(DenseLayer& layer, const Matrix& gW, const std::vector<double>& gb,
               AdamSlot& slot, double lr, long t) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    for (std::size_t r = 0; r < layer.weight.rows(); ++r)
        for (std::size_t c = 0; c < layer.weight.cols(); ++c) {
            double& m = slot.mW(r, c);
            double& v = slot.vW(r, c);
            const double g = gW(r, c);
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            layer.weight(r, c) -= lr * (m / c1) / (std::sqrt(v / c2) + eps);
        }
    for (std::size_t r = 0; r < layer.bias.size(); ++r) {
        double& m = slot.mb[r];
        double& v = slot.vb[r];
        const double g = gb[r];
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        layer.bias[r] -= lr * (m / c1) / (std::sqrt(v / c2) + eps);
    }
}

std::vector<double> matrix_to_flat(const Matrix& m) {
    return std::vector<double>(m.data(), m.data() + m.size());
}

Matrix matrix_from_flat(const std::vector<double>& flat, std::size_t rows, std::size_t cols,
                        const char* what) {
    if (flat.size() != rows * cols)
        throw ShapeMismatch(std::string(what) + ": expected " + std::to_string(rows * cols) +
                            " values, got " + std::to_string(flat.size()));
    Matrix m(rows, cols);
    std::copy(flat.begin(), flat.end(), m.data());
    return m;
}

const char* activation_name(Activation a) {
    return a == Activation::Relu ? "relu" : "none";
}

Activation activation_from(const std::string& name) {
    if (name == "relu") return Activation::Relu;
    if (name == "none") return Activation::None;
    throw SchemaError("unknown activation '" + name + "'");
}

} // namespace

void ModelFixture::validate() const {
    if (layers.empty()) throw SchemaError("fixture has no layers");
    if (tiles == 0 || cores_per_tile == 0 || core_size == 0)
        throw SchemaError("fixture chunk grid dimensions must be positive");
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const DenseLayer& layer = layers[l];
        if (layer.weight.rows() == 0 || layer.weight.cols() == 0)
            throw ShapeMismatch("layer " + std::to_string(l) + " has an empty weight matrix");
        if (layer.bias.size() != layer.weight.rows())
            throw ShapeMismatch("layer " + std::to_string(l) + " bias length " +
                                std::to_string(layer.bias.size()) + " != fan_out " +
                                std::to_string(layer.weight.rows()));
        if (l > 0 && layer.weight.cols() != layers[l - 1].weight.rows())
            throw ShapeMismatch("layer " + std::to_string(l) + " fan_in " +
                                std::to_string(layer.weight.cols()) + " != previous fan_out " +
                                std::to_string(layers[l - 1].weight.rows()));
    }
    if (geometry.size() != layers.size())
        throw ShapeMismatch("geometry count " + std::to_string(geometry.size()) +
                            " != layer count " + std::to_string(layers.size()));
    if (salience.size() != layers.size())
        throw ShapeMismatch("salience table count " + std::to_string(salience.size()) +
                            " != layer count " + std::to_string(layers.size()));
    const std::size_t bh = tiles * core_size, bw = cores_per_tile * core_size;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (!geometry[l].grad.same_shape(layers[l].weight) ||
            !geometry[l].sqgrad.same_shape(layers[l].weight))
            throw ShapeMismatch("layer " + std::to_string(l) +
                                " geometry shape differs from its weights");
        const std::size_t chunks = ceil_div(layers[l].weight.rows(), bh) *
                                   ceil_div(layers[l].weight.cols(), bw);
        if (salience[l].size() != chunks)
            throw ShapeMismatch("layer " + std::to_string(l) + " salience has " +
                                std::to_string(salience[l].size()) + " chunks, grid expects " +
                                std::to_string(chunks));
        for (double s : salience[l])
            if (!std::isfinite(s) || s < 0.0)
                throw SchemaError("layer " + std::to_string(l) +
                                  " salience entries must be finite and non-negative");
    }
    if (evaluation.inputs.rows() == 0) throw SchemaError("fixture has no evaluation samples");
    if (evaluation.inputs.cols() != layers.front().weight.cols())
        throw ShapeMismatch("evaluation input dim " + std::to_string(evaluation.inputs.cols()) +
                            " != model input dim " +
                            std::to_string(layers.front().weight.cols()));
    if (evaluation.labels.size() != evaluation.inputs.rows())
        throw ShapeMismatch("evaluation label count != sample count");
    const int classes = static_cast<int>(layers.back().weight.rows());
    for (int y : evaluation.labels)
        if (y < 0 || y >= classes) throw SchemaError("evaluation label out of range");
}

Dataset make_spirals(std::size_t count, std::size_t dim, std::uint64_t seed, double jitter,
                     std::uint64_t part) {
    if (count == 0 || dim < 2) throw ConfigError("make_spirals needs count >= 1 and dim >= 2");
    Rng embed = substream(seed, StreamTag::Trainer, 100);
    std::vector<double> lift(dim * 2);
    for (double& e : lift) e = embed.normal();

    Rng rng = substream(seed, StreamTag::Trainer, 101, part);
    Dataset data;
    data.inputs = Matrix(count, dim);
    data.labels.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const int cls = static_cast<int>(i & 1);
        const double u = rng.uniform();
        const double jx = rng.normal(), jy = rng.normal();
        const double radius = 0.1 + 0.9 * u;
        const double angle = 3.0 * 3.14159265358979323846 * u + cls * 3.14159265358979323846;
        const double px = radius * std::cos(angle) + jitter * jx;
        const double py = radius * std::sin(angle) + jitter * jy;
        for (std::size_t d = 0; d < dim; ++d)
            data.inputs(i, d) = lift[d * 2] * px + lift[d * 2 + 1] * py;
        data.labels[i] = cls;
    }
    return data;
}

std::vector<double> forward_software(const std::vector<DenseLayer>& layers,
                                     const std::vector<double>& input) {
    if (layers.empty()) throw ConfigError("forward_software: no layers");
    if (input.size() != layers.front().weight.cols())
        throw DimensionMismatch("forward_software: input dim " + std::to_string(input.size()) +
                                " != " + std::to_string(layers.front().weight.cols()));
    ForwardCache cache;
    forward_cached(layers, input.data(), input.size(), cache);
    return cache.acts.back();
}

double accuracy_software(const std::vector<DenseLayer>& layers, const Dataset& data) {
    if (data.inputs.rows() == 0) throw ConfigError("accuracy_software: empty dataset");
    ForwardCache cache;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.inputs.rows(); ++i) {
        forward_cached(layers, data.inputs.data() + i * data.inputs.cols(),
                       data.inputs.cols(), cache);
        const std::vector<double>& logits = cache.acts.back();
        const auto best = std::max_element(logits.begin(), logits.end());
        if (static_cast<int>(best - logits.begin()) == data.labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.inputs.rows());
}

ModelFixture train_fixture(const TrainOptions& opts, std::uint64_t seed, std::size_t tiles,
                           std::size_t cores_per_tile, std::size_t core_size) {
    if (opts.epochs < 0 || opts.batch == 0 || opts.learning_rate <= 0.0 ||
        opts.train_samples == 0 || opts.eval_samples == 0 || opts.input_dim < 2 ||
        opts.hidden == 0 || opts.classes < 2)
        throw ConfigError("train_fixture: invalid training options");

    ModelFixture fixture;
    fixture.train_seed = seed;
    fixture.tiles = tiles;
    fixture.cores_per_tile = cores_per_tile;
    fixture.core_size = core_size;

    // 16 -> hidden (relu) -> classes, He-initialized.
    const std::size_t dims[3] = {opts.input_dim, opts.hidden, opts.classes};
    for (std::size_t l = 0; l < 2; ++l) {
        DenseLayer layer;
        layer.weight = Matrix(dims[l + 1], dims[l]);
        layer.bias.assign(dims[l + 1], 0.0);
        layer.activation = (l == 0) ? Activation::Relu : Activation::None;
        Rng init = substream(seed, StreamTag::Trainer, 300, l);
        const double scale = std::sqrt(2.0 / static_cast<double>(dims[l]));
        for (std::size_t r = 0; r < layer.weight.rows(); ++r)
            for (std::size_t c = 0; c < layer.weight.cols(); ++c)
                layer.weight(r, c) = scale * init.normal();
        fixture.layers.push_back(std::move(layer));
    }

    Dataset train = make_spirals(opts.train_samples, opts.input_dim, seed, 0.05, 0);
    fixture.evaluation = make_spirals(opts.eval_samples, opts.input_dim, seed, 0.05, 1);

    std::vector<AdamSlot> slots(fixture.layers.size());
    for (std::size_t l = 0; l < fixture.layers.size(); ++l) {
        slots[l].mW = Matrix(dims[l + 1], dims[l]);
        slots[l].vW = Matrix(dims[l + 1], dims[l]);
        slots[l].mb.assign(dims[l + 1], 0.0);
        slots[l].vb.assign(dims[l + 1], 0.0);
    }

    std::vector<Matrix> gW(2);
    std::vector<std::vector<double>> gb(2);
    ForwardCache cache;
    std::vector<std::size_t> order(train.inputs.rows());
    std::iota(order.begin(), order.end(), 0);
    long t = 0;
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        // Cosine anneal keeps late epochs from oscillating around the optimum.
        const double lr = opts.learning_rate *
                          0.5 * (1.0 + std::cos(3.14159265358979323846 * epoch / opts.epochs));
        Rng shuffle = substream(seed, StreamTag::Trainer, 200, static_cast<std::uint64_t>(epoch));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle.next_u64() % i]);
        for (std::size_t start = 0; start < order.size(); start += opts.batch) {
            const std::size_t stop = std::min(start + opts.batch, order.size());
            for (std::size_t l = 0; l < 2; ++l) {
                gW[l] = Matrix(dims[l + 1], dims[l]);
                gb[l].assign(dims[l + 1], 0.0);
            }
            for (std::size_t i = start; i < stop; ++i) {
                const std::size_t row = order[i];
                backprop_sample(fixture.layers, train.inputs.data() + row * train.inputs.cols(),
                                train.inputs.cols(), train.labels[row], &gW, &gb, nullptr, cache);
            }
            const double inv = 1.0 / static_cast<double>(stop - start);
            for (std::size_t l = 0; l < 2; ++l) {
                for (std::size_t j = 0; j < gW[l].size(); ++j) gW[l].data()[j] *= inv;
                for (double& g : gb[l]) g *= inv;
            }
            ++t;
            for (std::size_t l = 0; l < 2; ++l)
                adam_step(fixture.layers[l], gW[l], gb[l], slots[l], lr, t);
        }
    }

    fixture.clean_accuracy = accuracy_software(fixture.layers, fixture.evaluation);
    if (fixture.clean_accuracy < opts.accuracy_floor)
        throw DidNotConverge("fixture reached " + std::to_string(fixture.clean_accuracy) +
                             " held-out accuracy, floor is " +
                             std::to_string(opts.accuracy_floor));

    // Loss geometry over the full training set: signed mean gradient and mean
    // squared per-sample gradient.
    std::vector<Matrix> sum(2), sumsq(2);
    for (std::size_t l = 0; l < 2; ++l) {
        sum[l] = Matrix(dims[l + 1], dims[l]);
        sumsq[l] = Matrix(dims[l + 1], dims[l]);
    }
    for (std::size_t i = 0; i < train.inputs.rows(); ++i)
        backprop_sample(fixture.layers, train.inputs.data() + i * train.inputs.cols(),
                        train.inputs.cols(), train.labels[i], &sum, nullptr, &sumsq, cache);
    const double inv_n = 1.0 / static_cast<double>(train.inputs.rows());
    fixture.geometry.resize(2);
    for (std::size_t l = 0; l < 2; ++l) {
        for (std::size_t j = 0; j < sum[l].size(); ++j) sum[l].data()[j] *= inv_n;
        for (std::size_t j = 0; j < sumsq[l].size(); ++j) sumsq[l].data()[j] *= inv_n;
        fixture.geometry[l].grad = std::move(sum[l]);
        fixture.geometry[l].sqgrad = std::move(sumsq[l]);
    }

    // Per-chunk salience: mean |grad| over each block of the chunk grid,
    // normalized per layer into selection probabilities.
    const std::size_t bh = tiles * core_size, bw = cores_per_tile * core_size;
    fixture.salience.resize(2);
    for (std::size_t l = 0; l < 2; ++l) {
        const Matrix& g = fixture.geometry[l].grad;
        const std::size_t brows = ceil_div(g.rows(), bh), bcols = ceil_div(g.cols(), bw);
        std::vector<double>& scores = fixture.salience[l];
        scores.assign(brows * bcols, 0.0);
        for (std::size_t bi = 0; bi < brows; ++bi)
            for (std::size_t bj = 0; bj < bcols; ++bj) {
                const std::size_t r0 = bi * bh, r1 = std::min(r0 + bh, g.rows());
                const std::size_t c0 = bj * bw, c1 = std::min(c0 + bw, g.cols());
                double acc = 0.0;
                for (std::size_t r = r0; r < r1; ++r)
                    for (std::size_t c = c0; c < c1; ++c) acc += std::abs(g(r, c));
                scores[bi * bcols + bj] =
                    acc / static_cast<double>((r1 - r0) * (c1 - c0));
            }
        const double total = std::accumulate(scores.begin(), scores.end(), 0.0);
        if (total > 0.0)
            for (double& s : scores) s /= total;
    }

    fixture.validate();
    return fixture;
}

void save_fixture(const ModelFixture& fixture, const std::string& path) {
    fixture.validate();
    json j;
    j["format"] = "ptasim-fixture-v1";
    j["train_seed"] = fixture.train_seed;
    j["clean_accuracy"] = fixture.clean_accuracy;
    j["grid"] = {{"tiles", fixture.tiles},
                 {"cores_per_tile", fixture.cores_per_tile},
                 {"core_size", fixture.core_size}};
    j["layers"] = json::array();
    for (std::size_t l = 0; l < fixture.layers.size(); ++l) {
        const DenseLayer& layer = fixture.layers[l];
        json jl;
        jl["rows"] = layer.weight.rows();
        jl["cols"] = layer.weight.cols();
        jl["activation"] = activation_name(layer.activation);
        jl["weight"] = matrix_to_flat(layer.weight);
        jl["bias"] = layer.bias;
        jl["grad"] = matrix_to_flat(fixture.geometry[l].grad);
        jl["sqgrad"] = matrix_to_flat(fixture.geometry[l].sqgrad);
        jl["salience"] = fixture.salience[l];
        j["layers"].push_back(std::move(jl));
    }
    j["evaluation"] = {{"count", fixture.evaluation.inputs.rows()},
                       {"dim", fixture.evaluation.inputs.cols()},
                       {"inputs", matrix_to_flat(fixture.evaluation.inputs)},
                       {"labels", fixture.evaluation.labels}};

    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("failed writing fixture to '" + path + "'");
}

ModelFixture load_fixture(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open fixture '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw SchemaError("fixture '" + path + "' is not valid JSON: " + e.what());
    }

    ModelFixture fixture;
    try {
        if (j.at("format").get<std::string>() != "ptasim-fixture-v1")
            throw SchemaError("fixture '" + path + "' has an unsupported format tag");
        fixture.train_seed = j.at("train_seed").get<std::uint64_t>();
        fixture.clean_accuracy = j.at("clean_accuracy").get<double>();
        const json& grid = j.at("grid");
        fixture.tiles = grid.at("tiles").get<std::size_t>();
        fixture.cores_per_tile = grid.at("cores_per_tile").get<std::size_t>();
        fixture.core_size = grid.at("core_size").get<std::size_t>();
        for (const json& jl : j.at("layers")) {
            const std::size_t rows = jl.at("rows").get<std::size_t>();
            const std::size_t cols = jl.at("cols").get<std::size_t>();
            DenseLayer layer;
            layer.weight =
                matrix_from_flat(jl.at("weight").get<std::vector<double>>(), rows, cols, "weight");
            layer.bias = jl.at("bias").get<std::vector<double>>();
            layer.activation = activation_from(jl.at("activation").get<std::string>());
            LayerGeometry geo;
            geo.grad =
                matrix_from_flat(jl.at("grad").get<std::vector<double>>(), rows, cols, "grad");
            geo.sqgrad =
                matrix_from_flat(jl.at("sqgrad").get<std::vector<double>>(), rows, cols, "sqgrad");
            fixture.layers.push_back(std::move(layer));
            fixture.geometry.push_back(std::move(geo));
            fixture.salience.push_back(jl.at("salience").get<std::vector<double>>());
        }
        const json& ev = j.at("evaluation");
        const std::size_t count = ev.at("count").get<std::size_t>();
        const std::size_t dim = ev.at("dim").get<std::size_t>();
        fixture.evaluation.inputs = matrix_from_flat(ev.at("inputs").get<std::vector<double>>(),
                                                     count, dim, "evaluation inputs");
        fixture.evaluation.labels = ev.at("labels").get<std::vector<int>>();
    } catch (const json::exception& e) {
        throw SchemaError("fixture '" + path + "' is missing or mistypes a field: " + e.what());
    }
    fixture.validate();
    return fixture;
}

SalienceTable layer_salience(const ModelFixture& fixture, std::size_t layer,
                             const WeightMapping& mapping) {
    if (layer >= fixture.salience.size())
        throw ShapeMismatch("layer index " + std::to_string(layer) + " out of range");
    const std::vector<double>& scores = fixture.salience[layer];
    if (scores.size() != mapping.chunk_count())
        throw ShapeMismatch("fixture salience has " + std::to_string(scores.size()) +
                            " chunks, mapping has " + std::to_string(mapping.chunk_count()));
    return SalienceTable{scores};
}

GradientTable layer_gradients(const ModelFixture& fixture, std::size_t layer,
                              const WeightMapping& mapping) {
    if (layer >= fixture.geometry.size())
        throw ShapeMismatch("layer index " + std::to_string(layer) + " out of range");
    const Matrix& g = fixture.geometry[layer].grad;
    const Matrix& h = fixture.geometry[layer].sqgrad;
    if (g.rows() != mapping.rows || g.cols() != mapping.cols)
        throw ShapeMismatch("gradient shape does not match the mapped matrix");
    const std::size_t bh = mapping.tiles * mapping.core_size;
    const std::size_t bw = mapping.cores_per_tile * mapping.core_size;
    GradientTable table;
    table.grad.reserve(mapping.chunk_count());
    table.curvature.reserve(mapping.chunk_count());
    for (std::size_t bi = 0; bi < mapping.block_rows; ++bi)
        for (std::size_t bj = 0; bj < mapping.block_cols; ++bj) {
            Matrix gb(bh, bw), hb(bh, bw);
            const std::size_t r0 = bi * bh, c0 = bj * bw;
            for (std::size_t r = r0; r < std::min(r0 + bh, g.rows()); ++r)
                for (std::size_t c = c0; c < std::min(c0 + bw, g.cols()); ++c) {
                    gb(r - r0, c - c0) = g(r, c);
                    hb(r - r0, c - c0) = h(r, c);
                }
            table.grad.push_back(std::move(gb));
            table.curvature.push_back(std::move(hb));
        }
    return table;
}

} // namespace pta
