#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pmstab/csv.hpp"
#include "pmstab/errors.hpp"
#include "pmstab/num/rng.hpp"
#include "pmstab/num/summation.hpp"
#include "pmstab/num/sym_matrix.hpp"

namespace pmstab {

enum class VarKind { binary, continuous, categorical };

// One declared variable. Categorical variables list their levels; the first
// level is the reference and is dropped in the one-hot encoding. Continuous
// variables carry a marginal (mean, sd) used when simulating.
struct VariableSpec {
    std::string name;
    VarKind kind = VarKind::binary;
    std::vector<std::string> levels; // categorical only
    double mean = 0.0;               // continuous only
    double sd = 1.0;                 // continuous only

    static VariableSpec binary(std::string name) {
        return VariableSpec{std::move(name), VarKind::binary, {}, 0.0, 1.0};
    }
    static VariableSpec continuous(std::string name, double mean, double sd) {
        if (!(sd > 0.0)) throw DomainError("continuous variable '" + name + "' needs sd > 0");
        return VariableSpec{std::move(name), VarKind::continuous, {}, mean, sd};
    }
    static VariableSpec categorical(std::string name, std::vector<std::string> levels) {
        if (levels.size() < 2) throw DomainError("categorical variable '" + name + "' needs >= 2 levels");
        for (std::size_t i = 0; i < levels.size(); ++i) {
            for (std::size_t j = i + 1; j < levels.size(); ++j) {
                if (levels[i] == levels[j]) {
                    throw DomainError("categorical variable '" + name + "' repeats level '" + levels[i] + "'");
                }
            }
        }
        return VariableSpec{std::move(name), VarKind::categorical, std::move(levels), 0.0, 1.0};
    }

    int n_columns() const {
        return kind == VarKind::categorical ? static_cast<int>(levels.size()) - 1 : 1;
    }
};

// Joint distribution of the binary/categorical block as an explicit cell
// table: each cell is one combination of values with its probability.
struct JointCellTable {
    struct Cell {
        std::vector<std::string> values; // aligned with `variables`
        double probability = 0.0;
    };

    std::vector<std::string> variables;
    std::vector<Cell> cells;

    void validate() const {
        num::CompensatedSum total;
        for (const auto& cell : cells) {
            if (cell.values.size() != variables.size()) {
                throw InvalidTable("cell arity != number of table variables");
            }
            if (!(cell.probability >= 0.0)) throw InvalidTable("negative cell probability");
            total.add(cell.probability);
        }
        for (std::size_t i = 0; i < cells.size(); ++i) {
            for (std::size_t j = i + 1; j < cells.size(); ++j) {
                if (cells[i].values == cells[j].values) throw InvalidTable("duplicate cell combination");
            }
        }
        if (std::abs(total.value() - 1.0) > 1e-9) {
            throw InvalidTable("cell probabilities sum to " + csv::format_double(total.value()) + ", not 1");
        }
    }

    // Rescale weights to probabilities (published tables often sum to ~100%
    // only after rounding).
    static JointCellTable normalized(JointCellTable t) {
        double total = 0.0;
        for (const auto& cell : t.cells) {
            if (!(cell.probability >= 0.0)) throw InvalidTable("negative cell weight");
            total += cell.probability;
        }
        if (!(total > 0.0)) throw InvalidTable("cell weights sum to zero");
        for (auto& cell : t.cells) cell.probability /= total;
        return t;
    }
};

struct Standardization {
    std::string variable;
    double mean = 0.0;
    double sd = 1.0;
};

// Immutable rectangular dataset. Categorical variables are stored one-hot
// against their reference level, so `values` is fully numeric; column_names
// reflect the expansion ("eth=asian", ...).
class Dataset {
public:
    Dataset(std::vector<VariableSpec> variables, std::size_t n)
        : variables_(std::move(variables)), n_(n) {
        int col = 0;
        for (const auto& v : variables_) {
            var_first_col_.push_back(col);
            if (v.kind == VarKind::categorical) {
                for (std::size_t l = 1; l < v.levels.size(); ++l) {
                    column_names_.push_back(v.name + "=" + v.levels[l]);
                }
            } else {
                column_names_.push_back(v.name);
            }
            col += v.n_columns();
        }
        values_.assign(n_ * static_cast<std::size_t>(col), 0.0);
    }

    std::size_t n() const { return n_; }
    int n_columns() const { return static_cast<int>(column_names_.size()); }
    const std::vector<VariableSpec>& variables() const { return variables_; }
    const std::vector<std::string>& column_names() const { return column_names_; }
    const std::vector<Standardization>& standardization() const { return standardization_; }

    std::span<const double> row(std::size_t i) const {
        return {values_.data() + i * static_cast<std::size_t>(n_columns()),
                static_cast<std::size_t>(n_columns())};
    }

    double value(std::size_t i, int col) const {
        return values_[i * static_cast<std::size_t>(n_columns()) + static_cast<std::size_t>(col)];
    }
    void set_value(std::size_t i, int col, double v) {
        values_[i * static_cast<std::size_t>(n_columns()) + static_cast<std::size_t>(col)] = v;
    }

    int variable_index(const std::string& name) const {
        for (std::size_t k = 0; k < variables_.size(); ++k) {
            if (variables_[k].name == name) return static_cast<int>(k);
        }
        return -1;
    }

    int first_column_of(int var_index) const { return var_first_col_[static_cast<std::size_t>(var_index)]; }

    // Display label of a variable's value in a row: binary -> "0"/"1",
    // categorical -> level name, continuous -> formatted number.
    std::string level_of(std::size_t i, int var_index) const {
        const auto& v = variables_[static_cast<std::size_t>(var_index)];
        const int c0 = var_first_col_[static_cast<std::size_t>(var_index)];
        if (v.kind == VarKind::categorical) {
            for (std::size_t l = 1; l < v.levels.size(); ++l) {
                if (value(i, c0 + static_cast<int>(l) - 1) == 1.0) return v.levels[l];
            }
            return v.levels[0];
        }
        if (v.kind == VarKind::binary) return value(i, c0) == 0.0 ? "0" : "1";
        return csv::format_double(value(i, c0));
    }

    void record_standardization(Standardization s) { standardization_.push_back(std::move(s)); }
    void set_standardization(std::vector<Standardization> s) { standardization_ = std::move(s); }

private:
    std::vector<VariableSpec> variables_;
    std::vector<std::string> column_names_;
    std::vector<int> var_first_col_;
    std::size_t n_ = 0;
    std::vector<double> values_;
    std::vector<Standardization> standardization_;
};

namespace detail {

inline void one_hot_assign(Dataset& ds, std::size_t row, int var_index, const VariableSpec& v,
                           const std::string& value, std::size_t csv_row, std::size_t csv_col) {
    const int c0 = ds.first_column_of(var_index);
    if (v.kind == VarKind::binary) {
        if (value == "0") {
            ds.set_value(row, c0, 0.0);
        } else if (value == "1") {
            ds.set_value(row, c0, 1.0);
        } else {
            throw ParseError("row " + std::to_string(csv_row) + ", column " + std::to_string(csv_col) +
                             ": binary value must be 0 or 1, got '" + value + "'");
        }
        return;
    }
    // categorical
    auto it = std::find(v.levels.begin(), v.levels.end(), value);
    if (it == v.levels.end()) {
        throw UnknownLevel("row " + std::to_string(csv_row) + ", column " + std::to_string(csv_col) +
                           ": '" + value + "' is not a level of " + v.name);
    }
    const std::size_t l = static_cast<std::size_t>(it - v.levels.begin());
    if (l > 0) ds.set_value(row, c0 + static_cast<int>(l) - 1, 1.0);
}

} // namespace detail

// Draw a synthetic population: the binary/categorical block i.i.d. from the
// cell table, the continuous block multivariate normal with the declared
// means/sds and optional correlation (identity when omitted). Draw order is
// fixed (one uniform for the cell, then one normal per continuous variable,
// row by row), so the result is a pure function of the stream.
inline Dataset simulate_joint(const JointCellTable& table, const std::vector<VariableSpec>& continuous,
                              const std::optional<num::SymMatrix>& corr, std::size_t n,
                              num::RngStream rng) {
    if (n < 1) throw DomainError("simulate_joint: n must be >= 1");
    if (table.cells.empty() != table.variables.empty()) {
        throw InvalidTable("cell table must name variables and cells together");
    }
    if (table.cells.empty() && continuous.empty()) {
        throw InvalidTable("nothing to simulate: no cells and no continuous variables");
    }
    if (!table.cells.empty()) table.validate();

    std::vector<VariableSpec> vars;
    std::vector<int> table_var_index;
    for (const auto& name : table.variables) {
        // Kind is inferred from the cell values: {0,1} means binary. Level
        // order follows first appearance in the table, so the first cell's
        // value is the one-hot reference.
        bool binary01 = true;
        std::vector<std::string> levels;
        for (const auto& cell : table.cells) {
            const std::string& v = cell.values[vars.size()];
            if (v != "0" && v != "1") binary01 = false;
            if (std::find(levels.begin(), levels.end(), v) == levels.end()) levels.push_back(v);
        }
        if (binary01) {
            vars.push_back(VariableSpec::binary(name));
        } else {
            vars.push_back(VariableSpec::categorical(name, levels));
        }
        table_var_index.push_back(static_cast<int>(vars.size()) - 1);
    }
    for (const auto& c : continuous) {
        if (c.kind != VarKind::continuous) throw DomainError("simulate_joint: '" + c.name + "' is not continuous");
        vars.push_back(c);
    }

    std::optional<num::CholeskyFactor> chol;
    if (corr) {
        if (corr->dim() != static_cast<int>(continuous.size())) {
            throw DimensionMismatch("corr dimension != number of continuous variables");
        }
        chol.emplace(*corr); // throws NotPositiveDefinite for an invalid correlation matrix
    }

    Dataset ds(vars, n);
    std::vector<double> cumulative;
    {
        double acc = 0.0;
        for (const auto& cell : table.cells) {
            acc += cell.probability;
            cumulative.push_back(acc);
        }
        if (!cumulative.empty()) cumulative.back() = 1.0;
    }

    std::vector<double> z(continuous.size());
    const int cont_first = static_cast<int>(vars.size() - continuous.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (!table.cells.empty()) {
            const double u = rng.next_uniform();
            std::size_t c = 0;
            while (c + 1 < cumulative.size() && u > cumulative[c]) ++c;
            const auto& cell = table.cells[c];
            for (std::size_t k = 0; k < table.variables.size(); ++k) {
                detail::one_hot_assign(ds, i, table_var_index[k], vars[static_cast<std::size_t>(table_var_index[k])],
                                       cell.values[k], i, k);
            }
        }
        if (!continuous.empty()) {
            for (auto& zk : z) zk = rng.next_normal();
            if (chol) z = chol->mul_lower(z);
            for (std::size_t k = 0; k < continuous.size(); ++k) {
                const auto& c = continuous[k];
                const int var_index = cont_first + static_cast<int>(k);
                ds.set_value(i, ds.first_column_of(var_index), c.mean + c.sd * z[k]);
            }
        }
    }
    return ds;
}

// Load a dataset from CSV. The header must equal the schema names in order;
// every cell must parse under its declared kind; missing values are an error.
inline Dataset load_csv(const std::string& path, const std::vector<VariableSpec>& schema) {
    const auto rows = csv::parse(csv::read_file(path));
    if (rows.empty()) throw ParseError(path + ": empty file");
    const auto& header = rows.front();
    if (header.size() != schema.size()) {
        throw ParseError(path + ": header has " + std::to_string(header.size()) + " columns, schema has " +
                         std::to_string(schema.size()));
    }
    for (std::size_t k = 0; k < schema.size(); ++k) {
        if (header[k] != schema[k].name) {
            throw ParseError(path + ": header column " + std::to_string(k) + " is '" + header[k] +
                             "', expected '" + schema[k].name + "'");
        }
    }

    Dataset ds(schema, rows.size() - 1);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != schema.size()) {
            throw ParseError(path + ": row " + std::to_string(r) + " has " + std::to_string(row.size()) +
                             " fields, expected " + std::to_string(schema.size()));
        }
        for (std::size_t k = 0; k < schema.size(); ++k) {
            const std::string& cell = row[k];
            if (cell.empty()) {
                throw MissingValue(path + ": row " + std::to_string(r) + ", column " + std::to_string(k) +
                                   " (" + schema[k].name + ") is empty");
            }
            const auto& v = schema[k];
            if (v.kind == VarKind::continuous) {
                char* end = nullptr;
                const double x = std::strtod(cell.c_str(), &end);
                if (end != cell.c_str() + cell.size() || !std::isfinite(x)) {
                    throw ParseError(path + ": row " + std::to_string(r) + ", column " + std::to_string(k) +
                                     ": '" + cell + "' is not a finite number");
                }
                ds.set_value(r - 1, ds.first_column_of(static_cast<int>(k)), x);
            } else {
                detail::one_hot_assign(ds, r - 1, static_cast<int>(k), v, cell, r, k);
            }
        }
    }
    return ds;
}

// Dump the expanded numeric matrix; format_double keeps the round trip exact.
inline std::string to_csv(const Dataset& ds) {
    std::string out = csv::join_row(ds.column_names());
    std::vector<std::string> fields(static_cast<std::size_t>(ds.n_columns()));
    for (std::size_t i = 0; i < ds.n(); ++i) {
        for (int c = 0; c < ds.n_columns(); ++c) {
            fields[static_cast<std::size_t>(c)] = csv::format_double(ds.value(i, c));
        }
        out += csv::join_row(fields);
    }
    return out;
}

// Replace each named continuous column by (x - mean) / sd with the column's
// own sample moments (sd uses the n-1 denominator); the moments are recorded
// so the transform can be undone.
inline Dataset standardize(const Dataset& ds, const std::vector<std::string>& names) {
    Dataset out = ds;
    for (const auto& name : names) {
        const int vi = out.variable_index(name);
        if (vi < 0) throw UnknownVariable("standardize: no variable named '" + name + "'");
        if (out.variables()[static_cast<std::size_t>(vi)].kind != VarKind::continuous) {
            throw DomainError("standardize: '" + name + "' is not continuous");
        }
        const int col = out.first_column_of(vi);
        num::CompensatedSum sum;
        for (std::size_t i = 0; i < out.n(); ++i) sum.add(out.value(i, col));
        const double mean = sum.value() / static_cast<double>(out.n());
        num::CompensatedSum ss;
        for (std::size_t i = 0; i < out.n(); ++i) {
            const double d = out.value(i, col) - mean;
            ss.add(d * d);
        }
        const double denom = out.n() > 1 ? static_cast<double>(out.n() - 1) : 1.0;
        const double sd = std::sqrt(ss.value() / denom);
        if (!(sd > 0.0)) throw ZeroVariance("standardize: '" + name + "' has zero variance");
        for (std::size_t i = 0; i < out.n(); ++i) out.set_value(i, col, (out.value(i, col) - mean) / sd);
        out.record_standardization({name, mean, sd});
    }
    return out;
}

inline Dataset unstandardize(const Dataset& ds) {
    Dataset out = ds;
    for (const auto& s : ds.standardization()) {
        const int vi = out.variable_index(s.variable);
        if (vi < 0) throw UnknownVariable("unstandardize: no variable named '" + s.variable + "'");
        const int col = out.first_column_of(vi);
        for (std::size_t i = 0; i < out.n(); ++i) out.set_value(i, col, out.value(i, col) * s.sd + s.mean);
    }
    out.set_standardization({});
    return out;
}

} // namespace pmstab
