#pragma once

#include <stdexcept>
#include <string>

namespace craft {

// Base for every error raised by the library. Validation findings are not
// errors: they are returned inside report structs (FormatReport,
// CollisionReport, ConnectivityReport, SimOutcome).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class JsonSyntaxError : public ParseError {
 public:
  using ParseError::ParseError;
};

class DuplicateId : public Error {
 public:
  explicit DuplicateId(const std::string& id)
      : Error("duplicate object id: " + id), id_(id) {}
  const std::string& id() const { return id_; }

 private:
  std::string id_;
};

class UnknownObject : public Error {
 public:
  explicit UnknownObject(const std::string& id)
      : Error("unknown object: " + id), id_(id) {}
  const std::string& id() const { return id_; }

 private:
  std::string id_;
};

class DimensionOutOfRange : public Error {
 public:
  using Error::Error;
};

class EmptyMesh : public Error {
 public:
  using Error::Error;
};

class DegenerateExtent : public Error {
 public:
  using Error::Error;
};

class CannotReachCount : public Error {
 public:
  using Error::Error;
};

class ClientError : public Error {
 public:
  using Error::Error;
};

}  // namespace craft
