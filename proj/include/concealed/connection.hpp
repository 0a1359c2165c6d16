#pragma once

#include "concealed/address_store.hpp"
#include "concealed/wire.hpp"

namespace concealed {

/// One request, one response, in order. Implementations are not required to be thread-safe;
/// a protocol engine owns its connection.
class Connection {
  public:
    virtual ~Connection() = default;
    virtual ServerFrame request(const ClientFrame& frame) = 0;
};

/// In-process connection to a store. By default every frame is pushed through the wire codec
/// so in-process runs exercise the same bytes as TCP.
class LocalConnection final : public Connection {
  public:
    explicit LocalConnection(AddressStore& store, bool through_codec = true)
            : store_{store}, through_codec_{through_codec} {}

    ServerFrame request(const ClientFrame& frame) override {
        if (!through_codec_)
            return store_.handle(frame);
        auto response = store_.handle(decode_client(encode(frame)));
        return decode_server(encode(response));
    }

  private:
    AddressStore& store_;
    bool through_codec_;
};

}  // namespace concealed
