#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace noran {

// Base for every error raised by the library. Subclasses carry the
// machine-checkable detail; what() is always human readable.
class Error : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

class MalformedLine : public Error {
   public:
    explicit MalformedLine(std::size_t line)
        : Error("malformed triple line " + std::to_string(line)), line_(line) {}
    std::size_t line() const { return line_; }

   private:
    std::size_t line_;
};

class EmptyInput : public Error {
   public:
    EmptyInput() : Error("input contains no triples") {}
};

class EmptyTrainGraph : public Error {
   public:
    EmptyTrainGraph() : Error("split leaves no training triples") {}
};

class InvalidArgument : public Error {
   public:
    using Error::Error;
};

class ShapeMismatch : public Error {
   public:
    using Error::Error;
};

class NonScalarLoss : public Error {
   public:
    NonScalarLoss() : Error("backward() requires a scalar loss") {}
};

class InvalidNode : public Error {
   public:
    explicit InvalidNode(std::size_t node)
        : Error("invalid node id " + std::to_string(node)), node_(node) {}
    std::size_t node() const { return node_; }

   private:
    std::size_t node_;
};

class AsymmetricAdjacency : public Error {
   public:
    AsymmetricAdjacency() : Error("adjacency is not symmetric") {}
};

class MissingFeatures : public Error {
   public:
    MissingFeatures() : Error("GAT convolution requires node features") {}
};

class EmptyBatch : public Error {
   public:
    EmptyBatch() : Error("estimator received an empty batch") {}
};

class BatchTooSmall : public Error {
   public:
    BatchTooSmall() : Error("negative pairing needs at least two anchors") {}
};

class UnknownRelation : public Error {
   public:
    explicit UnknownRelation(const std::string& name) : Error("unknown relation: " + name) {}
};

class EmptyEval : public Error {
   public:
    EmptyEval() : Error("no evaluation triples") {}
};

class BadMagic : public Error {
   public:
    BadMagic() : Error("not a checkpoint file (bad magic)") {}
};

class UnsupportedVersion : public Error {
   public:
    explicit UnsupportedVersion(unsigned version)
        : Error("unsupported checkpoint version " + std::to_string(version)) {}
};

class TruncatedFile : public Error {
   public:
    TruncatedFile() : Error("checkpoint file is truncated") {}
};

class ConfigError : public Error {
   public:
    using Error::Error;
};

}  // namespace noran
