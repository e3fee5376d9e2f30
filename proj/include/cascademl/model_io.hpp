#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cascademl/errors.hpp"
#include "cascademl/format.hpp"
#include "cascademl/network.hpp"

namespace cml {

// .cmnet: versioned plain-text network format. Numbers are written in the
// shortest decimal form that round-trips to the same double, so save/load is
// bit-exact. Layout:
//
//   cmnet 1
//   input_dim <d>
//   seed <u64>
//   [classes <n> followed by n "class <name>" lines]   (classifier metadata)
//   layers <count>
//   layer units <u> activation <name> dropout <r> batch_norm <0|1> l2 <r> init <name>
//   weights <in> <out>
//   <out numbers per line, in lines>
//   bias <out>
//   <numbers>
//   [bn_gamma / bn_beta / bn_mean / bn_var blocks when batch_norm]
//   end

inline std::string network_to_text(const DenseNetwork& net,
                                   const std::vector<std::string>& class_names = {}) {
    std::string out;
    out += "cmnet 1\n";
    out += "input_dim " + std::to_string(net.input_dim()) + "\n";
    out += "seed " + std::to_string(net.seed()) + "\n";
    if (!class_names.empty()) {
        out += "classes " + std::to_string(class_names.size()) + "\n";
        for (const std::string& name : class_names) out += "class " + name + "\n";
    }
    out += "layers " + std::to_string(net.n_layers()) + "\n";
    auto write_vector = [&out](const std::string& tag, const std::vector<double>& v) {
        out += tag + " " + std::to_string(v.size()) + "\n";
        for (std::size_t i = 0; i < v.size(); ++i) {
            out += format_double(v[i]);
            out += (i + 1 == v.size()) ? "\n" : " ";
        }
    };
    for (const Layer& layer : net.layers()) {
        const LayerSpec& spec = layer.spec;
        out += "layer units " + std::to_string(spec.units) +
               " activation " + to_string(spec.activation) +
               " dropout " + format_double(spec.dropout_rate) +
               " batch_norm " + (spec.batch_norm ? std::string("1") : std::string("0")) +
               " l2 " + format_double(spec.l2) +
               " init " + to_string(spec.init) + "\n";
        out += "weights " + std::to_string(layer.in_dim()) + " " +
               std::to_string(layer.units()) + "\n";
        for (std::size_t r = 0; r < layer.in_dim(); ++r) {
            for (std::size_t c = 0; c < layer.units(); ++c) {
                out += format_double(layer.weights(r, c));
                out += (c + 1 == layer.units()) ? "\n" : " ";
            }
        }
        write_vector("bias", layer.bias);
        if (spec.batch_norm) {
            write_vector("bn_gamma", layer.bn_gamma);
            write_vector("bn_beta", layer.bn_beta);
            write_vector("bn_mean", layer.bn_running_mean);
            write_vector("bn_var", layer.bn_running_var);
        }
    }
    out += "end\n";
    return out;
}

inline void save_network(const DenseNetwork& net, const std::string& path,
                         const std::vector<std::string>& class_names = {}) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write model file: " + path);
    out << network_to_text(net, class_names);
    if (!out) throw io_error("failed writing model file: " + path);
}

namespace detail {

class LineReader {
public:
    explicit LineReader(std::istream& in, const std::string& context)
        : in_(in), context_(context) {}

    std::vector<std::string> next() {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            std::istringstream ls(line);
            std::vector<std::string> tokens;
            std::string tok;
            while (ls >> tok) tokens.push_back(tok);
            if (!tokens.empty()) return tokens;
        }
        throw io_error(context_ + ": unexpected end of file");
    }

    std::size_t line_no() const { return line_no_; }

private:
    std::istream& in_;
    std::string context_;
    std::size_t line_no_ = 0;
};

inline std::vector<double> read_numbers(LineReader& reader, std::size_t count,
                                        const std::string& context) {
    std::vector<double> values;
    values.reserve(count);
    while (values.size() < count) {
        for (const std::string& tok : reader.next()) {
            if (values.size() == count)
                throw io_error(context + ": too many numbers at line " +
                               std::to_string(reader.line_no()));
            values.push_back(parse_double(tok));
        }
    }
    return values;
}

} // namespace detail

/// A deserialized model plus optional classifier metadata.
struct LoadedModel {
    DenseNetwork net;
    std::vector<std::string> class_names; // empty when the file carries none
};

inline LoadedModel load_model_from_stream(std::istream& in, const std::string& context) {
    detail::LineReader reader(in, context);
    auto expect = [&](const std::vector<std::string>& tokens, const std::string& tag,
                      std::size_t n_tokens) {
        if (tokens.size() != n_tokens || tokens[0] != tag)
            throw io_error(context + ": expected '" + tag + "' at line " +
                           std::to_string(reader.line_no()));
    };

    auto header = reader.next();
    expect(header, "cmnet", 2);
    if (header[1] != "1")
        throw io_error(context + ": unsupported cmnet version " + header[1]);

    auto dim_line = reader.next();
    expect(dim_line, "input_dim", 2);
    const std::size_t input_dim = std::stoul(dim_line[1]);

    auto seed_line = reader.next();
    expect(seed_line, "seed", 2);
    const std::uint64_t seed = std::stoull(seed_line[1]);

    std::vector<std::string> class_names;
    auto layers_line = reader.next();
    if (!layers_line.empty() && layers_line[0] == "classes") {
        expect(layers_line, "classes", 2);
        const std::size_t n_classes = std::stoul(layers_line[1]);
        for (std::size_t c = 0; c < n_classes; ++c) {
            auto class_line = reader.next();
            if (class_line[0] != "class")
                throw io_error(context + ": expected 'class' at line " +
                               std::to_string(reader.line_no()));
            std::string name;
            for (std::size_t t = 1; t < class_line.size(); ++t) {
                if (t > 1) name += " ";
                name += class_line[t];
            }
            class_names.push_back(name);
        }
        layers_line = reader.next();
    }
    expect(layers_line, "layers", 2);
    const std::size_t n_layers = std::stoul(layers_line[1]);

    DenseNetwork net(input_dim, seed);
    for (std::size_t li = 0; li < n_layers; ++li) {
        auto spec_line = reader.next();
        if (spec_line.size() != 13 || spec_line[0] != "layer")
            throw io_error(context + ": malformed layer line " +
                           std::to_string(reader.line_no()));
        LayerSpec spec;
        for (std::size_t i = 1; i + 1 < spec_line.size(); i += 2) {
            const std::string& key = spec_line[i];
            const std::string& value = spec_line[i + 1];
            if (key == "units") spec.units = std::stoul(value);
            else if (key == "activation") spec.activation = activation_from_string(value);
            else if (key == "dropout") spec.dropout_rate = parse_double(value);
            else if (key == "batch_norm") spec.batch_norm = value == "1";
            else if (key == "l2") spec.l2 = parse_double(value);
            else if (key == "init") spec.init = init_from_string(value);
            else throw io_error(context + ": unknown layer field '" + key + "'");
        }
        net.add_layer(spec);
        Layer& layer = net.layers().back();

        auto weights_line = reader.next();
        expect(weights_line, "weights", 3);
        if (std::stoul(weights_line[1]) != layer.in_dim() ||
            std::stoul(weights_line[2]) != layer.units())
            throw io_error(context + ": weight shape mismatch at line " +
                           std::to_string(reader.line_no()));
        layer.weights.data() =
            detail::read_numbers(reader, layer.in_dim() * layer.units(), context);

        auto bias_line = reader.next();
        expect(bias_line, "bias", 2);
        if (std::stoul(bias_line[1]) != layer.units())
            throw io_error(context + ": bias length mismatch at line " +
                           std::to_string(reader.line_no()));
        layer.bias = detail::read_numbers(reader, layer.units(), context);

        if (spec.batch_norm) {
            for (const std::string tag : {"bn_gamma", "bn_beta", "bn_mean", "bn_var"}) {
                auto bn_line = reader.next();
                expect(bn_line, tag, 2);
                auto values = detail::read_numbers(reader, layer.units(), context);
                if (tag == "bn_gamma") layer.bn_gamma = std::move(values);
                else if (tag == "bn_beta") layer.bn_beta = std::move(values);
                else if (tag == "bn_mean") layer.bn_running_mean = std::move(values);
                else layer.bn_running_var = std::move(values);
            }
        }
    }
    auto tail = reader.next();
    expect(tail, "end", 1);
    return LoadedModel{std::move(net), std::move(class_names)};
}

inline DenseNetwork load_network_from_stream(std::istream& in, const std::string& context) {
    return load_model_from_stream(in, context).net;
}

inline LoadedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot read model file: " + path);
    return load_model_from_stream(in, path);
}

inline DenseNetwork load_network(const std::string& path) {
    return load_model(path).net;
}

} // namespace cml
