/**
 * TCP planner service speaking the executor's wire protocol.
 *
 * One request line in, one response line out, strictly alternating per
 * connection. Connections are independent and handlers stateless, so
 * concurrent episodes cannot cross-talk. A malformed line kills only its
 * own connection.
 */

import { createServer, type AddressInfo, type Server, type Socket } from 'node:net';

import { nextResponse, type PlanTable } from './plans.js';
import { DecodeError, decodeRequest, encodeResponse } from './protocol.js';

function handleConnection(socket: Socket, plans: PlanTable): void {
  let buffer = '';
  socket.setEncoding('utf8');
  socket.on('data', (chunk: string) => {
    buffer += chunk;
    let newline = buffer.indexOf('\n');
    while (newline >= 0) {
      const line = buffer.slice(0, newline);
      buffer = buffer.slice(newline + 1);
      try {
        const request = decodeRequest(line);
        socket.write(encodeResponse(nextResponse(plans, request)));
      } catch (err) {
        if (err instanceof DecodeError) {
          socket.destroy();
          return;
        }
        throw err;
      }
      newline = buffer.indexOf('\n');
    }
  });
  socket.on('error', () => socket.destroy());
}

export interface RunningService {
  server: Server;
  port: number;
  close(): Promise<void>;
}

export function serveScripted(
  plans: PlanTable,
  host = '127.0.0.1',
  port = 0,
): Promise<RunningService> {
  const server = createServer((socket) => handleConnection(socket, plans));
  return new Promise((resolve, reject) => {
    server.once('error', reject);
    server.listen(port, host, () => {
      const bound = (server.address() as AddressInfo).port;
      resolve({
        server,
        port: bound,
        close: () =>
          new Promise<void>((done, fail) =>
            server.close((err) => (err ? fail(err) : done())),
          ),
      });
    });
  });
}
