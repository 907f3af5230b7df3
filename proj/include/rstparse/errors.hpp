#ifndef RSTPARSE_ERRORS_HPP
#define RSTPARSE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace rstparse
{
  // Bad user-supplied data or arguments (CLI exit code 1).
  class InputError : public std::runtime_error
  {
  public:
    using std::runtime_error::runtime_error;
  };

  // Malformed text in a corpus or record file.
  class ParseError : public InputError
  {
  public:
    ParseError(const std::string& source, std::size_t offset, const std::string& what)
      : InputError(source + ":" + std::to_string(offset) + ": " + what),
        source_(source), offset_(offset) {}

    const std::string& source() const { return source_; }
    std::size_t offset() const { return offset_; }

  private:
    std::string source_;
    std::size_t offset_;
  };

  // Structurally inconsistent data: span gaps, EDU count mismatches and the like.
  class IntegrityError : public InputError
  {
  public:
    using InputError::InputError;
  };

  // A transition was requested that the current configuration does not allow.
  class IllegalActionError : public std::logic_error
  {
  public:
    using std::logic_error::logic_error;
  };

  class TrainingError : public std::runtime_error
  {
  public:
    using std::runtime_error::runtime_error;
  };
}

#endif
