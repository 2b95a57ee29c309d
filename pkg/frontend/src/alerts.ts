/** Live alert feed over the rpi_security topic. */

import { BrokerClient, StreamStatus, Subscription } from "./api.js";

export interface Alert {
  title: string;
  body: string;
  imageUrl: string | null;
  receivedAt: Date;
}

export class AlertFeed {
  alerts: Alert[] = [];
  status: StreamStatus | "idle" = "idle";
  private subscription: Subscription | null = null;

  constructor(
    private client: BrokerClient,
    private topic = "rpi_security",
    private onChange: () => void = () => {},
  ) {}

  start(): void {
    if (this.subscription) return;
    this.subscription = this.client.subscribe(this.topic, {
      onMessage: (msg) => {
        const notification = (msg["notification"] ?? {}) as Record<string, string>;
        const data = (msg["data"] ?? {}) as Record<string, string>;
        this.alerts.push({
          title: notification["title"] ?? "(untitled)",
          body: notification["body"] ?? "",
          imageUrl: data["imageUrl"] ?? null,
          receivedAt: new Date(),
        });
        this.onChange();
      },
      onStatus: (status) => {
        this.status = status;
        this.onChange();
      },
    });
  }

  stop(): void {
    this.subscription?.close();
    this.subscription = null;
    this.status = "closed";
    this.onChange();
  }
}
